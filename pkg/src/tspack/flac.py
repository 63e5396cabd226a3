"""FLAC-subset encoder and strict decoder for integer sensor streams.

The encoder emits standard FLAC: "fLaC" magic, a STREAMINFO block (with the
MD5 of the raw samples), then frames of independently coded subframes. Per
subframe it picks the cheapest of constant / verbatim / fixed-order 0..4
polynomial prediction with Rice-coded residuals, by exact bit count. No LPC,
no inter-channel decorrelation, no lacing of any kind: every frame decodes
on its own, which is what makes container-level seeking cheap.

The decoder is deliberately strict: frame-header CRC-8, frame CRC-16 and the
STREAMINFO MD5 are always verified and each failure raises a distinct error.
"""

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as kern
from .bits import (BitReader, Bits, BitWriter, twos_complement_decode,
                   twos_complement_encode, uints_to_bits)
from .errors import (FlacBadMagic, FlacCrcError, FlacError, FlacMd5Error,
                     RiceDecodeError)
from .model import EncodedFrame, EncodedTrack, SampleFormat, UniformStream

MAGIC = b"fLaC"
CODEC_ID = "A_FLAC"

_BLOCK_SIZE_CODES = {192: 1, 576: 2, 1152: 3, 2304: 4, 4608: 5,
                     256: 8, 512: 9, 1024: 10, 2048: 11, 4096: 12,
                     8192: 13, 16384: 14, 32768: 15}
_SAMPLE_SIZE_CODES = {8: 1, 12: 2, 16: 4, 20: 5, 24: 6, 32: 7}
_SAMPLE_SIZE_FROM_CODE = {v: k for k, v in _SAMPLE_SIZE_CODES.items()}
_SAMPLE_RATE_FROM_CODE = {1: 88200, 2: 176400, 3: 192000, 4: 8000, 5: 16000,
                          6: 22050, 7: 24000, 8: 32000, 9: 44100, 10: 48000,
                          11: 96000}

_INT_FORMATS = (SampleFormat.INT8, SampleFormat.INT16, SampleFormat.INT24)


@dataclass(frozen=True)
class FlacStreamConfig:
    block_size: int = 4096
    bits_per_sample: int = 16
    channels: int = 1
    sample_rate_hz: int = 44100

    def __post_init__(self):
        if not 16 <= self.block_size <= 65535:
            raise ValueError("block_size must be in [16, 65535]")
        if self.bits_per_sample not in (8, 16, 24):
            raise ValueError("bits_per_sample must be 8, 16 or 24")
        if not 1 <= self.channels <= 8:
            raise ValueError("channels must be in 1..8")
        if not 1 <= self.sample_rate_hz <= 655350:
            raise ValueError("sample_rate_hz out of range")


@dataclass(frozen=True)
class SubframeChoice:
    """Winning subframe encoding for one channel of one frame."""

    kind: str  # "constant" | "verbatim" | "fixed"
    order: int = 0
    rice_k: int = 0


# --- public coding primitives ----------------------------------------------

def fixed_predict(samples, order: int) -> np.ndarray:
    """Residuals of the fixed polynomial predictor of the given order.

    Order o residuals are the o-th finite differences of the signal; the
    first `order` samples are warm-up and are not part of the output.
    """
    x = np.ascontiguousarray(samples, dtype=np.int64)
    if not 0 <= order <= 4:
        raise ValueError("order must be in 0..4")
    if x.size < order:
        raise ValueError("need at least `order` samples")
    return kern.fixed_diff(x, order)


def fixed_unpredict(warmup, residuals, order: int) -> np.ndarray:
    """Inverse of fixed_predict given the `order` warm-up samples."""
    w = np.ascontiguousarray(warmup, dtype=np.int64)
    r = np.ascontiguousarray(residuals, dtype=np.int64)
    if w.size != order:
        raise ValueError("warmup length must equal order")
    return kern.fixed_undiff(w, r, order)


def rice_encode(residuals, k: int) -> Bits:
    """Rice-code signed residuals: zigzag, then per value the quotient
    ``m >> k`` as that many one-bits plus a terminating zero, then the k low
    bits of m."""
    if not 0 <= k <= 30:
        raise ValueError("k must be in 0..30")
    u = kern.zigzag(np.ascontiguousarray(residuals, dtype=np.int64))
    if u.size and int((u >> k).sum()) + u.size * (1 + k) > 1 << 33:
        raise ValueError("rice parameter far too small for these residuals")
    return Bits.from_array(kern.rice_encode_bits(u, k, False))


def rice_decode(bits, count: int, k: int) -> np.ndarray:
    """Inverse of rice_encode; needs the value count. Raises RiceDecodeError
    with the offending bit offset when the bitstring is truncated."""
    if not 0 <= k <= 30:
        raise ValueError("k must be in 0..30")
    arr = bits.to_array() if isinstance(bits, Bits) else np.ascontiguousarray(bits, dtype=np.uint8)
    values, _end = kern.rice_decode_bits(arr, 0, count, k, False)
    return kern.unzigzag(values)


def choose_rice_k(residuals) -> int:
    """The k in 0..30 with the smallest exact encoded bit length
    (first k wins ties), found by exhaustive scan."""
    r = np.ascontiguousarray(residuals, dtype=np.int64)
    if r.size == 0:
        raise ValueError("residuals must be nonempty")
    costs = kern.rice_cost_all(kern.zigzag(r))
    return int(np.argmin(costs))


# --- helpers ----------------------------------------------------------------

def encode_coded_number(v: int) -> bytes:
    """UTF-8-style variable-length frame/sample number (up to 36 bits)."""
    if v < 0:
        raise ValueError("coded number must be non-negative")
    if v < 0x80:
        return bytes([v])
    for extra in range(1, 7):
        if v < 1 << (5 * extra + 6):
            break
    else:
        raise ValueError("coded number exceeds 36 bits")
    out = bytearray(extra + 1)
    for i in range(extra, 0, -1):
        out[i] = 0x80 | (v & 0x3F)
        v >>= 6
    ones = extra + 1
    out[0] = ((0xFF << (8 - ones)) & 0xFF) | v
    return bytes(out)


def decode_coded_number(data: bytes, pos: int):
    if pos >= len(data):
        raise FlacError(f"truncated coded number at byte {pos}")
    b0 = data[pos]
    if b0 < 0x80:
        return b0, pos + 1
    ones = 8 - (b0 ^ 0xFF).bit_length()
    if not 2 <= ones <= 7 or pos + ones > len(data):
        raise FlacError(f"malformed coded number at byte {pos}")
    v = b0 & (0xFF >> (ones + 1)) if ones < 7 else 0
    for i in range(1, ones):
        b = data[pos + i]
        if b & 0xC0 != 0x80:
            raise FlacError(f"malformed coded number at byte {pos + i}")
        v = (v << 6) | (b & 0x3F)
    return v, pos + ones


def samples_md5(interleaved: np.ndarray, bits: int) -> bytes:
    """MD5 of the raw little-endian signed sample bytes, channel-interleaved."""
    a = np.ascontiguousarray(interleaved)
    if bits == 8:
        raw = a.astype("<i1").tobytes()
    elif bits == 16:
        raw = a.astype("<i2").tobytes()
    elif bits == 24:
        v = a.astype(np.int64)
        b = np.empty((v.size, 3), np.uint8)
        b[:, 0] = v & 0xFF
        b[:, 1] = (v >> 8) & 0xFF
        b[:, 2] = (v >> 16) & 0xFF
        raw = b.tobytes()
    else:
        raise ValueError("bits must be 8, 16 or 24")
    return hashlib.md5(raw).digest()


def _build_streaminfo(cfg: FlacStreamConfig, total_samples: int, md5: bytes,
                      min_frame: int, max_frame: int) -> bytes:
    bw = BitWriter()
    bw.write_uint(1, 1)  # last metadata block
    bw.write_uint(0, 7)  # STREAMINFO
    bw.write_uint(34, 24)
    bw.write_uint(cfg.block_size, 16)
    bw.write_uint(cfg.block_size, 16)
    bw.write_uint(min_frame, 24)
    bw.write_uint(max_frame, 24)
    bw.write_uint(cfg.sample_rate_hz, 20)
    bw.write_uint(cfg.channels - 1, 3)
    bw.write_uint(cfg.bits_per_sample - 1, 5)
    bw.write_uint(total_samples, 36)
    bw.write_bytes(md5)
    return bw.pack()


_KS = np.arange(31, dtype=np.int64)
_MAX_PARTITION_ORDER = 6


def _plan_residual(u: np.ndarray, n: int, order: int):
    """Best partitioned-Rice layout for zigzagged residuals u of a block of
    n samples: exhaustive over partition orders (while 2^p divides n and the
    first partition keeps room for the warm-up) and over k per partition.

    Returns (bits, method, partition_order, per-partition k array); bits
    includes the method/partition/parameter overhead.
    """
    m = u.size
    if m == 0:
        return 2 + 4 + 4, 0, 0, np.zeros(1, np.int64)
    pmax = 0
    while (pmax < _MAX_PARTITION_ORDER and n % (1 << (pmax + 1)) == 0
           and (n >> (pmax + 1)) > order):
        pmax += 1
    parts = 1 << pmax
    psize = n >> pmax
    starts = np.maximum(np.arange(parts, dtype=np.int64) * psize - order, 0)
    sums = np.empty((parts, 31), np.int64)
    for k in range(31):
        sums[:, k] = np.add.reduceat(u >> k, starts)
    counts = np.diff(np.append(starts, m))

    best = None
    p = pmax
    while True:
        cost = sums + counts[:, None] * (1 + _KS)[None, :]
        rice1 = int(cost[:, :15].min(axis=1).sum()) + 4 * cost.shape[0]
        rice2 = int(cost.min(axis=1).sum()) + 5 * cost.shape[0]
        if rice1 <= rice2:
            cand = (2 + 4 + rice1, 0, p, cost[:, :15].argmin(axis=1))
        else:
            cand = (2 + 4 + rice2, 1, p, cost.argmin(axis=1))
        if best is None or cand[0] < best[0]:
            best = cand
        if p == 0:
            break
        sums = sums[0::2] + sums[1::2]
        counts = counts[0::2] + counts[1::2]
        p -= 1
    return best


def _write_residual(bw: BitWriter, u: np.ndarray, n: int, order: int,
                    method: int, part_order: int, ks: np.ndarray):
    bw.write_uint(method, 2)
    bw.write_uint(part_order, 4)
    parts = 1 << part_order
    psize = n >> part_order
    param_bits = 4 if method == 0 else 5
    pos = 0
    for j in range(parts):
        cnt = psize - (order if j == 0 else 0)
        bw.write_uint(int(ks[j]), param_bits)
        bw.write_bits(kern.rice_encode_bits(u[pos:pos + cnt], int(ks[j]), True))
        pos += cnt


def _best_fixed(x: np.ndarray, bps: int):
    """Scan fixed orders 0..4; returns (cost_bits, order, residual plan, u)."""
    best = None
    n = x.size
    for order in range(min(4, n) + 1):
        u = kern.zigzag(kern.fixed_diff(x, order))
        plan = _plan_residual(u, n, order)
        cost = 8 + order * bps + plan[0]
        if best is None or cost < best[0]:
            best = (cost, order, plan, u)
    return best


def _write_subframe(bw: BitWriter, x: np.ndarray, bps: int) -> SubframeChoice:
    n = x.size
    constant = bool(n) and bool((x == x[0]).all())
    const_cost = 8 + bps if constant else None
    verb_cost = 8 + n * bps
    fix_cost, order, plan, u = _best_fixed(x, bps)
    plan_bits, method, part_order, ks = plan

    if constant and const_cost <= min(verb_cost, fix_cost):
        bw.write_uint(0, 1)
        bw.write_uint(0, 6)
        bw.write_uint(0, 1)
        bw.write_signed(int(x[0]), bps)
        return SubframeChoice("constant")
    if fix_cost < verb_cost:
        bw.write_uint(0, 1)
        bw.write_uint(8 + order, 6)
        bw.write_uint(0, 1)
        for v in x[:order].tolist():
            bw.write_signed(v, bps)
        _write_residual(bw, u, n, order, method, part_order, ks)
        return SubframeChoice("fixed", order=order, rice_k=int(ks.max()) if ks.size else 0)
    bw.write_uint(0, 1)
    bw.write_uint(1, 6)
    bw.write_uint(0, 1)
    bw.write_bits(uints_to_bits(twos_complement_encode(x, bps), bps))
    return SubframeChoice("verbatim")


def _encode_frame(block: np.ndarray, frame_index: int, cfg: FlacStreamConfig):
    """block: (n, channels) int64. Returns (frame bytes, subframe choices)."""
    n = block.shape[0]
    bw = BitWriter()
    bw.write_uint(0b11111111111110, 14)
    bw.write_uint(0, 1)
    bw.write_uint(0, 1)  # fixed block size stream: coded number is the frame index
    bs_code = _BLOCK_SIZE_CODES.get(n)
    if bs_code is None:
        bs_code = 6 if n - 1 <= 0xFF else 7
    bw.write_uint(bs_code, 4)
    bw.write_uint(0, 4)  # sample rate: from STREAMINFO
    bw.write_uint(cfg.channels - 1, 4)
    bw.write_uint(_SAMPLE_SIZE_CODES[cfg.bits_per_sample], 3)
    bw.write_uint(0, 1)
    header = bytearray(bw.pack())
    header += encode_coded_number(frame_index)
    if bs_code == 6:
        header.append(n - 1)
    elif bs_code == 7:
        header += (n - 1).to_bytes(2, "big")
    header.append(kern.crc8(bytes(header)))

    sub = BitWriter()
    choices = []
    for ch in range(cfg.channels):
        choices.append(_write_subframe(sub, np.ascontiguousarray(block[:, ch]), cfg.bits_per_sample))
    sub.pad_to_byte()
    frame = bytes(header) + sub.pack()
    frame += kern.crc16(frame).to_bytes(2, "big")
    return frame, choices


def flac_encode(stream: UniformStream, cfg: FlacStreamConfig | None = None) -> EncodedTrack:
    """Encode an int8/int16/int24 stream as a standalone-valid FLAC stream.

    codec_private carries the "fLaC" magic plus STREAMINFO (the layout
    Matroska expects in CodecPrivate); frame payloads follow in order.
    """
    if stream.format not in _INT_FORMATS:
        raise FlacError(f"unsupported sample format {stream.format.kind}; 24-bit is the codec's hard limit")
    if stream.channels > 8:
        raise FlacError("at most 8 channels")
    if cfg is None:
        rate = max(1, min(655350, round(stream.rate_hz)))
        cfg = FlacStreamConfig(block_size=4096, bits_per_sample=stream.format.bits_per_sample,
                               channels=stream.channels, sample_rate_hz=int(rate))
    if cfg.channels != stream.channels or cfg.bits_per_sample != stream.format.bits_per_sample:
        raise FlacError("config does not match the stream layout")

    data = stream.frames_2d().astype(np.int64)
    n_total = data.shape[0]
    md5 = samples_md5(stream.samples, cfg.bits_per_sample)

    frames = []
    counts = {"constant": 0, "verbatim": 0, "fixed": 0}
    sizes = []
    for idx, off in enumerate(range(0, n_total, cfg.block_size)):
        block = data[off:off + cfg.block_size]
        payload, choices = _encode_frame(block, idx, cfg)
        for c in choices:
            counts[c.kind] += 1
        sizes.append(len(payload))
        frames.append(EncodedFrame(
            time_s=stream.start_time_s + Fraction(off) / stream.rate_hz,
            payload=payload,
            duration_s=Fraction(block.shape[0]) / stream.rate_hz,
        ))
    clamp = (1 << 24) - 1
    min_fs = min(sizes) if sizes else 0
    max_fs = max(sizes) if sizes else 0
    header = MAGIC + _build_streaminfo(cfg, n_total, md5, min(min_fs, clamp), min(max_fs, clamp))
    stats = (("subframes_constant", counts["constant"]),
             ("subframes_verbatim", counts["verbatim"]),
             ("subframes_fixed", counts["fixed"]),
             ("raw_bytes", stream.samples.size * (cfg.bits_per_sample // 8)))
    return EncodedTrack(name=stream.name, codec_id=CODEC_ID, codec_private=header,
                        frames=tuple(frames), kind="audio", rate_hz=stream.rate_hz,
                        channels=stream.channels, format=stream.format,
                        start_time_s=stream.start_time_s, meta=stream.meta, stats=stats)


# --- decoding ----------------------------------------------------------------

@dataclass(frozen=True)
class StreamInfo:
    min_block_size: int
    max_block_size: int
    min_frame_size: int
    max_frame_size: int
    sample_rate_hz: int
    channels: int
    bits_per_sample: int
    total_samples: int
    md5: bytes


def parse_stream_header(data: bytes):
    """Parse magic + metadata blocks; returns (StreamInfo, frame data offset)."""
    if data[:4] != MAGIC:
        raise FlacBadMagic("not a FLAC stream (bad magic)")
    pos = 4
    info = None
    while True:
        if pos + 4 > len(data):
            raise FlacError("truncated metadata block header")
        last = data[pos] >> 7
        btype = data[pos] & 0x7F
        length = int.from_bytes(data[pos + 1:pos + 4], "big")
        pos += 4
        if pos + length > len(data):
            raise FlacError("truncated metadata block")
        if btype == 0:
            if length != 34:
                raise FlacError("STREAMINFO must be 34 bytes")
            br = BitReader.from_bytes(data[pos:pos + 34])
            info = StreamInfo(
                min_block_size=br.read_uint(16), max_block_size=br.read_uint(16),
                min_frame_size=br.read_uint(24), max_frame_size=br.read_uint(24),
                sample_rate_hz=br.read_uint(20), channels=br.read_uint(3) + 1,
                bits_per_sample=br.read_uint(5) + 1, total_samples=br.read_uint(36),
                md5=bytes(data[pos + 18:pos + 34]),
            )
        pos += length
        if last:
            break
    if info is None:
        raise FlacError("missing STREAMINFO")
    return info, pos


def _read_residual(br: BitReader, block_size: int, order: int) -> np.ndarray:
    method = br.read_uint(2)
    if method > 1:
        raise FlacError(f"reserved residual method {method}")
    part_order = br.read_uint(4)
    parts = 1 << part_order
    if block_size % parts:
        raise FlacError("partition order does not divide block size")
    if (block_size >> part_order) < order:
        raise FlacError("first partition has no room for the warm-up samples")
    param_bits = 4 if method == 0 else 5
    escape = (1 << param_bits) - 1
    out = []
    for p in range(parts):
        count = (block_size >> part_order) - (order if p == 0 else 0)
        param = br.read_uint(param_bits)
        if param == escape:
            raw_bits = br.read_uint(5)
            if raw_bits == 0:
                vals = np.zeros(count, np.int64)
            else:
                vals = twos_complement_decode(br.read_uints(count, raw_bits), raw_bits)
            out.append(vals)
        else:
            values, end = kern.rice_decode_bits(br.bits, br.pos, count, param, True)
            br.pos = end
            out.append(kern.unzigzag(values))
    return np.concatenate(out) if out else np.zeros(0, np.int64)


def _read_subframe(br: BitReader, n: int, bps: int) -> np.ndarray:
    if br.read_uint(1):
        raise FlacError("subframe padding bit set")
    stype = br.read_uint(6)
    wasted = 0
    if br.read_uint(1):
        wasted = br.read_unary(1) + 1
    eff = bps - wasted
    if eff < 1:
        raise FlacError("wasted bits exceed the sample size")
    if stype == 0:
        samples = np.full(n, br.read_signed(eff), np.int64)
    elif stype == 1:
        samples = twos_complement_decode(br.read_uints(n, eff), eff)
    elif 8 <= stype <= 12:
        order = stype - 8
        if order > n:
            raise FlacError("fixed order exceeds block size")
        warm = np.array([br.read_signed(eff) for _ in range(order)], np.int64)
        res = _read_residual(br, n, order)
        samples = kern.fixed_undiff(warm, res, order)
    elif stype >= 32:
        raise FlacError("LPC subframes are outside this decoder's subset")
    else:
        raise FlacError(f"reserved subframe type {stype}")
    return samples << wasted if wasted else samples


def decode_frame(info: StreamInfo, frame: bytes):
    """Decode one standalone frame; returns (first_sample_index, (n, ch) int64)."""
    br = BitReader.from_bytes(frame)
    _consumed, first, block = _decode_frame_at(info, frame, br, 0)
    return first, block


def _decode_frame_at(info: StreamInfo, data: bytes, br: BitReader, byte_base: int):
    """Decode the frame starting at byte_base (br positioned there)."""
    if br.read_uint(14) != 0b11111111111110:
        raise FlacError(f"lost frame sync at byte {byte_base}")
    br.read_uint(1)
    variable_blocking = br.read_uint(1)
    bs_code = br.read_uint(4)
    sr_code = br.read_uint(4)
    chan_code = br.read_uint(4)
    bps_code = br.read_uint(3)
    br.read_uint(1)
    if chan_code > 7:
        raise FlacError("stereo decorrelation modes are outside this decoder's subset")
    channels = chan_code + 1
    bps = info.bits_per_sample if bps_code == 0 else _SAMPLE_SIZE_FROM_CODE.get(bps_code)
    if bps is None:
        raise FlacError(f"reserved sample size code {bps_code}")

    coded, nxt = decode_coded_number(data, br.pos // 8)
    br.pos = nxt * 8

    if bs_code == 0:
        raise FlacError("reserved block size code 0")
    elif bs_code == 1:
        n = 192
    elif bs_code <= 5:
        n = 576 << (bs_code - 2)
    elif bs_code == 6:
        n = br.read_uint(8) + 1
    elif bs_code == 7:
        n = br.read_uint(16) + 1
    else:
        n = 256 << (bs_code - 8)

    if sr_code == 12:
        br.read_uint(8)
    elif sr_code in (13, 14):
        br.read_uint(16)
    elif sr_code == 15:
        raise FlacError("invalid sample rate code")

    crc_pos = br.pos // 8
    if kern.crc8(data[byte_base:crc_pos]) != br.read_uint(8):
        raise FlacCrcError("frame header CRC-8", coded)

    chans = [(_read_subframe(br, n, bps)) for _ in range(channels)]
    br.align_to_byte()
    end_pos = br.pos // 8
    if kern.crc16(data[byte_base:end_pos]) != br.read_uint(16):
        raise FlacCrcError("frame CRC-16", coded)
    end_pos += 2

    first_sample = coded if variable_blocking else coded * info.max_block_size
    return end_pos - byte_base, first_sample, np.stack(chans, axis=1)


@dataclass(frozen=True)
class DecodedAudio:
    samples: np.ndarray  # interleaved, native dtype
    channels: int
    bits_per_sample: int
    sample_rate_hz: int
    total_samples: int


def _native_dtype(bits: int):
    return {8: np.int8, 16: np.int16, 24: np.int32}[bits]


def flac_decode(data: bytes) -> DecodedAudio:
    """Strict full-stream decode with CRC-8/CRC-16/MD5 verification."""
    info, pos = parse_stream_header(data)
    if info.bits_per_sample not in (8, 16, 24):
        raise FlacError(f"unsupported bit depth {info.bits_per_sample}")
    frames_data = data[pos:]
    br = BitReader.from_bytes(frames_data)
    blocks = []
    decoded = 0
    while decoded < info.total_samples:
        byte_base = br.pos // 8
        try:
            consumed, first, block = _decode_frame_at(info, frames_data, br, byte_base)
        except RiceDecodeError as e:
            raise FlacError(f"truncated frame (bit {e.bit_offset})") from e
        br.pos = (byte_base + consumed) * 8
        if first != decoded:
            raise FlacError(f"frame out of order: first sample {first}, expected {decoded}")
        blocks.append(block)
        decoded += block.shape[0]
    if br.pos // 8 != len(frames_data):
        raise FlacError("trailing bytes after final frame")
    all_samples = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, info.channels), np.int64)
    interleaved = all_samples.astype(_native_dtype(info.bits_per_sample)).reshape(-1)
    if samples_md5(interleaved, info.bits_per_sample) != info.md5:
        raise FlacMd5Error()
    return DecodedAudio(samples=interleaved, channels=info.channels,
                        bits_per_sample=info.bits_per_sample,
                        sample_rate_hz=info.sample_rate_hz,
                        total_samples=info.total_samples)
