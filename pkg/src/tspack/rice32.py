"""Lossless 32-bit codec for float32 and int32 streams ("A_TS/RICE32").

float32 samples are reinterpreted as their 32-bit two's-complement patterns,
so the round trip is bit-exact including NaN payloads and infinities. Each
block picks, per channel and by exact bit count, a fixed polynomial
predictor order 0..4 with Rice-coded residuals, escaping to verbatim 32-bit
words whenever the Rice scan would expand the data.

Layout (all integers little-endian):
  codec private: "TSR1", u8 version, u8 kind (0=float32, 1=int32),
                 u8 channels, u8 reserved, u32 block_size, u64 total frames,
                 u32 crc32 of the raw sample bytes
  frame: u32 block index, u32 frames in block, then per channel
         u8 mode (order 0..4, or 255=verbatim), u8 rice k,
         byte-padded bit section (warm-up 32-bit words + Rice residuals,
         or verbatim 32-bit words)

Frames decode independently, which the container's seek path relies on.
"""

import struct
import zlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as kern
from .bits import BitWriter, twos_complement_decode, twos_complement_encode, uints_to_bits
from .errors import Rice32Error, RiceDecodeError
from .model import EncodedFrame, EncodedTrack, SampleFormat, UniformStream

MAGIC = b"TSR1"
CODEC_ID = "A_TS/RICE32"
VERBATIM = 255

_HEADER = struct.Struct("<4sBBBBIQI")

KIND_FLOAT32 = 0
KIND_INT32 = 1


@dataclass(frozen=True)
class Rice32Header:
    kind: int
    channels: int
    block_size: int
    total_frames: int
    crc32: int

    @property
    def format(self) -> SampleFormat:
        return SampleFormat.FLOAT32 if self.kind == KIND_FLOAT32 else SampleFormat.INT32


def _raw_bytes(samples: np.ndarray, fmt: SampleFormat) -> bytes:
    if fmt is SampleFormat.FLOAT32:
        return samples.astype("<f4").tobytes()
    return samples.astype("<i4").tobytes()


def _patterns(samples: np.ndarray, fmt: SampleFormat) -> np.ndarray:
    """int64 view of the 32-bit sample patterns."""
    if fmt is SampleFormat.FLOAT32:
        return samples.view(np.int32).astype(np.int64)
    return samples.astype(np.int64)


def _encode_channel(bw: BitWriter, x: np.ndarray):
    """Append mode byte, k byte and the padded bit section for one channel."""
    n = x.size
    verb_bits = n * 32
    best = None  # (content_bits, order, k, residuals)
    for order in range(min(4, n) + 1):
        res = kern.fixed_diff(x, order)
        costs = kern.rice_cost_all(kern.zigzag(res))
        k = int(np.argmin(costs))
        bits = order * 32 + int(costs[k])
        if best is None or bits < best[0]:
            best = (bits, order, k, res)
    if best[0] < verb_bits:
        _bits, order, k, res = best
        bw.write_uint(order, 8)
        bw.write_uint(k, 8)
        bw.write_bits(uints_to_bits(twos_complement_encode(x[:order], 32), 32))
        bw.write_bits(kern.rice_encode_bits(kern.zigzag(res), k, False))
        mode = order
    else:
        bw.write_uint(VERBATIM, 8)
        bw.write_uint(0, 8)
        bw.write_bits(uints_to_bits(twos_complement_encode(x, 32), 32))
        mode = VERBATIM
    bw.pad_to_byte()
    return mode


def rice32_encode(stream: UniformStream, block_size: int | None = None) -> EncodedTrack:
    if stream.format not in (SampleFormat.FLOAT32, SampleFormat.INT32):
        raise Rice32Error(f"unsupported sample format {stream.format.kind}")
    if block_size is None:
        block_size = 4096
    if not 16 <= block_size <= 1 << 20:
        raise ValueError("block_size out of range")
    kind = KIND_FLOAT32 if stream.format.is_float else KIND_INT32
    data = _patterns(stream.samples, stream.format).reshape(stream.n_frames, stream.channels)
    crc = zlib.crc32(_raw_bytes(stream.samples, stream.format)) & 0xFFFFFFFF
    header = _HEADER.pack(MAGIC, 1, kind, stream.channels, 0, block_size, stream.n_frames, crc)

    frames = []
    modes = {"fixed": 0, "verbatim": 0}
    for index, off in enumerate(range(0, stream.n_frames, block_size)):
        block = data[off:off + block_size]
        bw = BitWriter()
        for ch in range(stream.channels):
            mode = _encode_channel(bw, np.ascontiguousarray(block[:, ch]))
            modes["verbatim" if mode == VERBATIM else "fixed"] += 1
        payload = struct.pack("<II", index, block.shape[0]) + bw.pack()
        frames.append(EncodedFrame(
            time_s=stream.start_time_s + Fraction(off) / stream.rate_hz,
            payload=payload,
            duration_s=Fraction(block.shape[0]) / stream.rate_hz,
        ))
    stats = (("blocks_fixed", modes["fixed"]), ("blocks_verbatim", modes["verbatim"]),
             ("raw_bytes", stream.samples.size * 4))
    return EncodedTrack(name=stream.name, codec_id=CODEC_ID, codec_private=header,
                        frames=tuple(frames), kind="audio", rate_hz=stream.rate_hz,
                        channels=stream.channels, format=stream.format,
                        start_time_s=stream.start_time_s, meta=stream.meta, stats=stats)


def parse_header(data: bytes):
    """Parse the codec-private header; returns (Rice32Header, offset past it)."""
    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise Rice32Error("not a rice32 stream (bad magic)")
    magic, version, kind, channels, _res, block_size, total, crc = _HEADER.unpack_from(data)
    if version != 1:
        raise Rice32Error(f"unsupported version {version}")
    if kind not in (KIND_FLOAT32, KIND_INT32):
        raise Rice32Error(f"unknown sample kind {kind}")
    if channels < 1:
        raise Rice32Error("channel count must be >= 1")
    return Rice32Header(kind, channels, block_size, total, crc), _HEADER.size


_WORD_WEIGHTS = (np.int64(1) << np.arange(31, -1, -1, dtype=np.int64))


def _read_words(bits: np.ndarray, pos: int, count: int) -> np.ndarray:
    """count 32-bit two's-complement words from the bit array -> int64 values."""
    need = count * 32
    if pos + need > bits.size:
        raise Rice32Error("frame truncated in 32-bit word data")
    section = bits[pos:pos + need].astype(np.int64).reshape(count, 32)
    return twos_complement_decode((section @ _WORD_WEIGHTS).astype(np.uint64), 32)


def decode_frame(header: Rice32Header, payload: bytes):
    """Decode one frame from the start of `payload`.

    Returns (block_index, (n, channels) int64 patterns, consumed_bytes).
    """
    if len(payload) < 8:
        raise Rice32Error("frame too short")
    index, count = struct.unpack_from("<II", payload)
    body = np.frombuffer(payload, dtype=np.uint8, offset=8)
    bits = np.unpackbits(body)
    pos = 0
    chans = []
    try:
        for _ in range(header.channels):
            if pos + 16 > bits.size:
                raise Rice32Error("frame truncated in channel header")
            mode = int(body[pos // 8])
            k = int(body[pos // 8 + 1])
            pos += 16
            if mode == VERBATIM:
                chans.append(_read_words(bits, pos, count))
                pos += count * 32
            elif mode <= 4:
                if k > 30:
                    raise Rice32Error(f"rice parameter {k} out of range")
                order = mode
                if count < order:
                    raise Rice32Error("block shorter than predictor order")
                warm = _read_words(bits, pos, order)
                pos += order * 32
                values, pos = kern.rice_decode_bits(bits, pos, count - order, k, False)
                chans.append(kern.fixed_undiff(warm, kern.unzigzag(values), order))
            else:
                raise Rice32Error(f"unknown channel mode {mode}")
            pos += -pos % 8
    except RiceDecodeError as e:
        raise Rice32Error(f"frame truncated at bit {e.bit_offset}") from e
    block = np.stack(chans, axis=1) if chans else np.zeros((count, 0), np.int64)
    return index, block, 8 + pos // 8


@dataclass(frozen=True)
class DecodedRice32:
    samples: np.ndarray  # interleaved float32 or int32
    channels: int
    format: SampleFormat
    total_frames: int


def _patterns_to_samples(patterns: np.ndarray, fmt: SampleFormat) -> np.ndarray:
    words = patterns.astype(np.int32)
    return words.view(np.float32) if fmt.is_float else words


def rice32_decode(data: bytes) -> DecodedRice32:
    """Full-stream decode of codec_private + concatenated frames, with CRC check."""
    header, pos = parse_header(data)
    blocks = {}
    decoded = 0
    while decoded < header.total_frames:
        count = min(header.block_size, header.total_frames - decoded)
        index, block, consumed = decode_frame(header, data[pos:])
        if block.shape[0] != count:
            raise Rice32Error(f"block {index}: expected {count} frames, found {block.shape[0]}")
        if index in blocks:
            raise Rice32Error(f"duplicate block index {index}")
        blocks[index] = block
        pos += consumed
        decoded += count
    if pos != len(data):
        raise Rice32Error("trailing bytes after final frame")
    if sorted(blocks) != list(range(len(blocks))):
        raise Rice32Error("missing block indices")
    patterns = np.concatenate([blocks[i] for i in sorted(blocks)], axis=0) if blocks else np.zeros((0, header.channels), np.int64)
    samples = _patterns_to_samples(patterns.reshape(-1), header.format)
    if zlib.crc32(_raw_bytes(samples, header.format)) & 0xFFFFFFFF != header.crc32:
        raise Rice32Error("decoded samples do not match the stream CRC-32")
    return DecodedRice32(samples=samples, channels=header.channels,
                         format=header.format, total_frames=header.total_frames)
