"""Dataset-level packing and unpacking.

Codec routing follows the sample format: int8/int16/int24 streams become
FLAC tracks, float32 and int32 streams become rice32 tracks (FLAC's hard
24-bit limit), sparse tracks become ASS subtitle tracks. An explicit
"pcm_f32" override stores float32 uncompressed as A_PCM/FLOAT/IEEE.

Codec block sizes are chosen so one block spans at most the cluster length
(default 5 s) at the stream's rate; that makes container seeking granular
for slow sensor streams.

Exact rationals that Matroska cannot carry natively (rates, start times,
metadata fractions) travel in per-track tags, so unpack reproduces the
dataset bit-exactly.
"""

import math
from fractions import Fraction

import numpy as np

from . import flac, mkv, rice32, ssa
from .errors import DataError, MkvError, UsageError
from .model import (Dataset, EncodedFrame, EncodedTrack, Event, SampleFormat,
                    SparseTrack, StreamMeta, UniformStream, as_fraction)

PCM_FLOAT_CODEC_ID = "A_PCM/FLOAT/IEEE"

_FLAC_FORMATS = (SampleFormat.INT8, SampleFormat.INT16, SampleFormat.INT24)


def block_size_for_rate(rate_hz: Fraction, seconds=Fraction(5), lo=16, hi=4096) -> int:
    """Samples per codec block: the power of two nearest `seconds` worth of
    samples, clamped to [lo, hi]. Powers of two keep the whole range of Rice
    partition orders available inside each frame."""
    n = float(as_fraction(rate_hz) * as_fraction(seconds))
    if n <= lo:
        return lo
    return max(lo, min(hi, 1 << round(math.log2(n))))


def encode_stream(stream: UniformStream, codec: str | None = None,
                  block_seconds=Fraction(5)) -> EncodedTrack:
    """Encode one uniform stream with the format-appropriate codec.

    codec: None for automatic routing, or one of "flac", "rice32", "pcm_f32".
    """
    if codec is None:
        codec = "flac" if stream.format in _FLAC_FORMATS else "rice32"
    block = block_size_for_rate(stream.rate_hz, as_fraction(block_seconds))
    if codec == "flac":
        rate = max(1, min(655350, round(stream.rate_hz)))
        cfg = flac.FlacStreamConfig(block_size=block,
                                    bits_per_sample=stream.format.bits_per_sample,
                                    channels=stream.channels, sample_rate_hz=int(rate))
        return flac.flac_encode(stream, cfg)
    if codec == "rice32":
        return rice32.rice32_encode(stream, block_size=block)
    if codec == "pcm_f32":
        return pcm_f32_encode(stream, block_size=block)
    raise UsageError(f"unknown codec {codec!r}")


def pcm_f32_encode(stream: UniformStream, block_size: int = 4096) -> EncodedTrack:
    """Uncompressed little-endian float32 PCM blocks (A_PCM/FLOAT/IEEE)."""
    if stream.format is not SampleFormat.FLOAT32:
        raise DataError("pcm_f32 requires a float32 stream")
    rows = stream.frames_2d()
    frames = []
    for off in range(0, stream.n_frames, block_size):
        chunk = rows[off:off + block_size]
        frames.append(EncodedFrame(
            time_s=stream.start_time_s + Fraction(off) / stream.rate_hz,
            payload=chunk.astype("<f4").tobytes(),
            duration_s=Fraction(chunk.shape[0]) / stream.rate_hz))
    return EncodedTrack(name=stream.name, codec_id=PCM_FLOAT_CODEC_ID, codec_private=b"",
                        frames=tuple(frames), kind="audio", rate_hz=stream.rate_hz,
                        channels=stream.channels, format=stream.format,
                        start_time_s=stream.start_time_s, meta=stream.meta,
                        stats=(("raw_bytes", stream.samples.size * 4),))


def encode_sparse_track(track: SparseTrack) -> EncodedTrack:
    """Sparse events as an ASS subtitle track: document header in
    codec_private, one Dialogue body per block."""
    frames = []
    for i, ev in enumerate(track.events):
        frames.append(EncodedFrame(time_s=ev.time_s, duration_s=ev.duration_s,
                                   payload=ssa.block_text(ev, i).encode("utf-8")))
    return EncodedTrack(name=track.name, codec_id=mkv.SUBTITLE_CODEC_ID,
                        codec_private=ssa.codec_private_text(track).encode("utf-8"),
                        frames=tuple(frames), kind="subtitle")


def encode_dataset(dataset: Dataset, codec_overrides: dict | None = None,
                   block_seconds=Fraction(5)) -> list:
    overrides = codec_overrides or {}
    out = [encode_stream(s, overrides.get(s.name), block_seconds) for s in dataset.streams]
    out += [encode_sparse_track(t) for t in dataset.tracks]
    return out


def pack(dataset: Dataset, options: mkv.MuxOptions | None = None,
         codec_overrides: dict | None = None) -> bytes:
    opts = options or mkv.MuxOptions()
    encoded = encode_dataset(dataset, codec_overrides, opts.cluster_seconds)
    return mkv.mux(dataset, encoded, opts)


# --- reading ------------------------------------------------------------------

def _meta_from_tags(tags: dict) -> StreamMeta:
    extra = {k[len(mkv.TAG_EXTRA_PREFIX):]: v for k, v in tags.items()
             if k.startswith(mkv.TAG_EXTRA_PREFIX)}
    def frac(name):
        return Fraction(tags[name]) if name in tags else None
    return StreamMeta(units=tags.get(mkv.TAG_UNITS, ""),
                      si_conversion_factor=frac(mkv.TAG_SI_FACTOR),
                      range_min=frac(mkv.TAG_RANGE_MIN),
                      range_max=frac(mkv.TAG_RANGE_MAX),
                      extra=tuple(extra.items()))


def _track_rate(tr: mkv.MkvTrack) -> Fraction:
    if mkv.TAG_RATE_EXACT in tr.tags:
        return Fraction(tr.tags[mkv.TAG_RATE_EXACT])
    if tr.sampling_frequency:
        return Fraction(tr.sampling_frequency).limit_denominator(10 ** 9)
    raise DataError(f"track {tr.name!r} has no sampling rate")


def _track_start(tr: mkv.MkvTrack) -> Fraction:
    if mkv.TAG_START_EXACT in tr.tags:
        return Fraction(tr.tags[mkv.TAG_START_EXACT])
    return Fraction(0)


def _track_format(tr: mkv.MkvTrack) -> SampleFormat:
    if mkv.TAG_FORMAT in tr.tags:
        return SampleFormat.from_name(tr.tags[mkv.TAG_FORMAT])
    if tr.codec_id == flac.CODEC_ID:
        info, _ = flac.parse_stream_header(tr.codec_private)
        return {8: SampleFormat.INT8, 16: SampleFormat.INT16, 24: SampleFormat.INT24}[info.bits_per_sample]
    if tr.codec_id == rice32.CODEC_ID:
        header, _ = rice32.parse_header(tr.codec_private)
        return header.format
    if tr.codec_id == PCM_FLOAT_CODEC_ID:
        return SampleFormat.FLOAT32
    raise DataError(f"cannot infer sample format for codec {tr.codec_id!r}")


def skeleton(m: mkv.MkvFile) -> Dataset:
    """Dataset metadata without payload: streams get empty sample arrays,
    sparse tracks get no events."""
    streams = []
    tracks = []
    for tr in m.tracks:
        if tr.track_type == mkv.TRACK_TYPE_AUDIO:
            fmt = _track_format(tr)
            streams.append(UniformStream(
                name=tr.name, rate_hz=_track_rate(tr), channels=tr.channels or 1,
                format=fmt, samples=np.zeros(0, fmt.dtype),
                start_time_s=_track_start(tr), meta=_meta_from_tags(tr.tags)))
        elif tr.track_type == mkv.TRACK_TYPE_SUBTITLE:
            tracks.append(SparseTrack(name=tr.name, events=()))
    return Dataset(session_meta=tuple(m.session_tags.items()),
                   streams=tuple(streams), tracks=tuple(tracks))


def _decode_flac_track(tr: mkv.MkvTrack, frames: list) -> np.ndarray:
    info, _ = flac.parse_stream_header(tr.codec_private)
    stream = tr.codec_private + b"".join(f.payload for f in frames)
    decoded = flac.flac_decode(stream)
    return decoded.samples


def _decode_rice32_track(tr: mkv.MkvTrack, frames: list) -> np.ndarray:
    stream = tr.codec_private + b"".join(f.payload for f in frames)
    return rice32.rice32_decode(stream).samples


def _decode_pcm_track(tr: mkv.MkvTrack, frames: list) -> np.ndarray:
    raw = b"".join(f.payload for f in frames)
    if len(raw) % 4:
        raise DataError("PCM float payload not a multiple of 4 bytes")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def _decode_audio(tr: mkv.MkvTrack, frames: list) -> np.ndarray:
    if tr.codec_id == flac.CODEC_ID:
        return _decode_flac_track(tr, frames)
    if tr.codec_id == rice32.CODEC_ID:
        return _decode_rice32_track(tr, frames)
    if tr.codec_id == PCM_FLOAT_CODEC_ID:
        return _decode_pcm_track(tr, frames)
    raise DataError(f"no decoder for codec {tr.codec_id!r}")


def _as_mkv(data) -> mkv.MkvFile:
    return data if isinstance(data, mkv.MkvFile) else mkv.demux(data)


def unpack(data) -> Dataset:
    """Full container round trip: demux, decode every track, rebuild the
    dataset with exact rates, start times and metadata. Accepts container
    bytes or an already-open MkvFile."""
    m = _as_mkv(data)
    scale = m.timestamp_scale_ns
    frames_by_track = {tr.number: [] for tr in m.tracks}
    for f in m.frames():
        if f.track_number in frames_by_track:
            frames_by_track[f.track_number].append(f)
    streams = []
    tracks = []
    for tr in m.tracks:
        frames = frames_by_track[tr.number]
        if tr.track_type == mkv.TRACK_TYPE_AUDIO:
            fmt = _track_format(tr)
            samples = _decode_audio(tr, frames)
            if not fmt.is_float and samples.dtype != fmt.dtype:
                samples = samples.astype(fmt.dtype)
            streams.append(UniformStream(
                name=tr.name, rate_hz=_track_rate(tr), channels=tr.channels or 1,
                format=fmt, samples=samples, start_time_s=_track_start(tr),
                meta=_meta_from_tags(tr.tags)))
        elif tr.track_type == mkv.TRACK_TYPE_SUBTITLE:
            events = []
            for f in frames:
                dur = f.duration_s(scale) or Fraction(0)
                events.append(ssa.event_from_block(f.payload.decode("utf-8"),
                                                   f.time_s(scale), dur))
            tracks.append(SparseTrack(name=tr.name, events=tuple(events)))
        # other track types (video, ...) pass through untouched: no decode
    return Dataset(session_meta=tuple(m.session_tags.items()),
                   streams=tuple(streams), tracks=tuple(tracks))


def unpack_window(data, track_names: list, t_start_s, t_end_s):
    """Decode only the frames overlapping a time window, via the seek index.

    Returns (results, used_cues) where results maps track name to either a
    UniformStream fragment or a SparseTrack fragment. Accepts container
    bytes or an already-open MkvFile.
    """
    m = _as_mkv(data)
    scale = m.timestamp_scale_ns
    results = {}
    used_cues = True
    for name in track_names:
        tr = m.track_by_name(name)
        if tr is None:
            raise UsageError(f"no track named {name!r}")
        res = m.seek_window(tr.number, t_start_s, t_end_s)
        used_cues = used_cues and res.used_cues
        if tr.track_type == mkv.TRACK_TYPE_SUBTITLE:
            events = [ssa.event_from_block(f.payload.decode("utf-8"), f.time_s(scale),
                                           f.duration_s(scale) or Fraction(0))
                      for f in res.frames]
            results[name] = SparseTrack(name=name, events=tuple(events))
            continue
        fmt = _track_format(tr)
        rate = _track_rate(tr)
        start = _track_start(tr)
        if not res.frames:
            results[name] = UniformStream(name=name, rate_hz=rate, channels=tr.channels or 1,
                                          format=fmt, samples=np.zeros(0, fmt.dtype),
                                          start_time_s=start, meta=_meta_from_tags(tr.tags))
            continue
        if tr.codec_id == flac.CODEC_ID:
            info, _ = flac.parse_stream_header(tr.codec_private)
            pieces = []
            first_index = None
            for f in res.frames:
                idx, block = flac.decode_frame(info, f.payload)
                if first_index is None:
                    first_index = idx
                pieces.append(block)
            samples = np.concatenate(pieces, axis=0).astype(fmt.dtype).reshape(-1)
            frag_start = start + Fraction(first_index) / rate
        elif tr.codec_id == rice32.CODEC_ID:
            header, _ = rice32.parse_header(tr.codec_private)
            pieces = []
            first_sample = None
            for f in res.frames:
                idx, block, _used = rice32.decode_frame(header, f.payload)
                if first_sample is None:
                    first_sample = idx * header.block_size
                pieces.append(block)
            patterns = np.concatenate(pieces, axis=0).reshape(-1).astype(np.int32)
            samples = patterns.view(np.float32) if fmt.is_float else patterns
            frag_start = start + Fraction(first_sample) / rate
        elif tr.codec_id == PCM_FLOAT_CODEC_ID:
            samples = np.frombuffer(b"".join(f.payload for f in res.frames), dtype="<f4").astype(np.float32)
            first_tick = res.frames[0].time_ticks
            offset = round(Fraction(first_tick * scale, 1_000_000_000) * rate - start * rate)
            frag_start = start + Fraction(int(offset)) / rate
        else:
            raise DataError(f"no decoder for codec {tr.codec_id!r}")
        results[name] = UniformStream(name=name, rate_hz=rate, channels=tr.channels or 1,
                                      format=fmt, samples=samples, start_time_s=frag_start,
                                      meta=_meta_from_tags(tr.tags))
    return results, used_cues
