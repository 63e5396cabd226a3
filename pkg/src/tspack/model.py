"""Domain model for multi-rate time-series recording sessions.

A Dataset bundles constant-rate sensor streams (UniformStream), sparse
time-coded event tracks (SparseTrack) and free-form session metadata; one
Dataset maps to one container file. Rates and times are fractions.Fraction
so the implicit sample grid ``start + i / rate`` is exact; sample payloads
are numpy arrays. All types are immutable values after construction.
"""

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DataError, NonMonotonicTimestamps

RationalLike = Fraction | int | float | str


def as_fraction(value) -> Fraction:
    """Coerce ints, floats, decimal strings and 'num/den' strings to Fraction."""
    if isinstance(value, Fraction):
        return value
    return Fraction(value)


class SampleFormat(enum.Enum):
    """Per-sample number format of a uniform stream.

    int24 values travel in int32 arrays but must stay within
    [-2**23, 2**23 - 1].
    """

    INT8 = ("int8", 8)
    INT16 = ("int16", 16)
    INT24 = ("int24", 24)
    INT32 = ("int32", 32)
    FLOAT32 = ("float32", 32)

    def __init__(self, kind, bits):
        self.kind = kind
        self.bits_per_sample = bits

    @property
    def is_float(self):
        return self is SampleFormat.FLOAT32

    @property
    def dtype(self):
        return _STORAGE_DTYPE[self]

    @property
    def min_value(self):
        if self.is_float:
            raise TypeError("float32 has no integer range")
        return -(1 << (self.bits_per_sample - 1))

    @property
    def max_value(self):
        if self.is_float:
            raise TypeError("float32 has no integer range")
        return (1 << (self.bits_per_sample - 1)) - 1

    @classmethod
    def from_name(cls, name: str) -> "SampleFormat":
        for fmt in cls:
            if fmt.kind == name:
                return fmt
        raise ValueError(f"unknown sample format {name!r}")


_STORAGE_DTYPE = {
    SampleFormat.INT8: np.dtype(np.int8),
    SampleFormat.INT16: np.dtype(np.int16),
    SampleFormat.INT24: np.dtype(np.int32),
    SampleFormat.INT32: np.dtype(np.int32),
    SampleFormat.FLOAT32: np.dtype(np.float32),
}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class StreamMeta:
    """Descriptive metadata attached to one stream: units, an optional
    conversion factor to SI units, optional range bounds, free-form extras."""

    units: str = ""
    si_conversion_factor: Fraction | None = None
    range_min: Fraction | None = None
    range_max: Fraction | None = None
    extra: tuple = ()  # ordered (key, value) string pairs

    def __post_init__(self):
        if self.range_min is not None and self.range_max is not None:
            if self.range_min > self.range_max:
                raise ValueError("range_min exceeds range_max")
        object.__setattr__(self, "extra", tuple((str(k), str(v)) for k, v in dict(self.extra).items()))

    @property
    def extra_map(self) -> dict:
        return dict(self.extra)


@dataclass(frozen=True, eq=False)
class UniformStream:
    """Constant-rate, channel-interleaved sample block.

    Sample i of channel c lives at ``samples[i * channels + c]`` and occurs
    at time ``start_time_s + i / rate_hz``; no per-sample timestamps are
    stored.
    """

    name: str
    rate_hz: Fraction
    channels: int
    format: SampleFormat
    samples: np.ndarray
    start_time_s: Fraction = Fraction(0)
    meta: StreamMeta = field(default_factory=StreamMeta)

    def __post_init__(self):
        object.__setattr__(self, "rate_hz", as_fraction(self.rate_hz))
        object.__setattr__(self, "start_time_s", as_fraction(self.start_time_s))
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.start_time_s < 0:
            raise ValueError("start_time_s must be non-negative")
        arr = np.asarray(self.samples, dtype=self.format.dtype)
        if arr.ndim != 1:
            raise ValueError("samples must be 1-D channel-interleaved")
        if arr.size % self.channels:
            raise ValueError("samples length not divisible by channel count")
        if self.format in (SampleFormat.INT24,) and arr.size:
            lo, hi = int(arr.min()), int(arr.max())
            if lo < self.format.min_value or hi > self.format.max_value:
                raise ValueError("int24 sample outside [-2^23, 2^23-1]")
        object.__setattr__(self, "samples", _freeze(arr))

    @property
    def n_frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def end_time_s(self) -> Fraction:
        """Time of the last sample (== start_time_s when empty or length 1)."""
        if self.n_frames <= 1:
            return self.start_time_s
        return self.start_time_s + Fraction(self.n_frames - 1) / self.rate_hz

    def timestamps(self) -> np.ndarray:
        """float64 reconstruction of the implicit sample grid."""
        return float(self.start_time_s) + np.arange(self.n_frames, dtype=np.float64) / float(self.rate_hz)

    def frames_2d(self) -> np.ndarray:
        """(n_frames, channels) view of the interleaved samples."""
        return self.samples.reshape(self.n_frames, self.channels)


@dataclass(frozen=True, eq=False)
class TimecodedSeries:
    """Rows of values with explicit per-row timestamps, as parsed from a
    time-coded CSV file. Input to the resampler; never muxed directly."""

    name: str
    times_s: np.ndarray  # float64, nondecreasing
    values: np.ndarray  # float64, shape (n, columns)
    meta: StreamMeta = field(default_factory=StreamMeta)

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if t.ndim != 1 or v.shape[0] != t.size:
            raise ValueError("times and value rows must have matching length")
        if t.size:
            bad = np.flatnonzero(np.diff(t) < 0)
            if bad.size:
                raise NonMonotonicTimestamps(int(bad[0]) + 1)
        object.__setattr__(self, "times_s", _freeze(t))
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_rows(self) -> int:
        return self.times_s.size

    @property
    def columns(self) -> int:
        return self.values.shape[1] if self.values.ndim == 2 else 1


_ALLOWED_CONTROL = {"\n", "\t"}


@dataclass(frozen=True)
class Event:
    """One ``<timestamp, event data>`` tuple; duration 0 means instantaneous."""

    time_s: Fraction
    payload: str
    duration_s: Fraction = Fraction(0)
    position: tuple | None = None  # (x, y) pixels in an adjacent video frame

    def __post_init__(self):
        object.__setattr__(self, "time_s", as_fraction(self.time_s))
        object.__setattr__(self, "duration_s", as_fraction(self.duration_s))
        if self.time_s < 0:
            raise ValueError("event time must be non-negative")
        if self.duration_s < 0:
            raise ValueError("event duration must be non-negative")
        for ch in self.payload:
            if ord(ch) < 0x20 and ch not in _ALLOWED_CONTROL:
                raise ValueError(f"control character {ch!r} in event payload")
        if self.position is not None:
            x, y = self.position
            object.__setattr__(self, "position", (int(x), int(y)))


@dataclass(frozen=True, eq=False)
class SparseTrack:
    """Independently timed events (annotations, switch states, RFID reads).

    Events are kept sorted by time; ties preserve insertion order.
    """

    name: str
    events: tuple

    def __post_init__(self):
        evs = tuple(sorted(self.events, key=lambda e: e.time_s))
        object.__setattr__(self, "events", evs)

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True, eq=False)
class Dataset:
    """One recording session: the unit that maps to one container file."""

    session_meta: tuple = ()  # ordered (key, value) string pairs
    streams: tuple = ()
    tracks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "session_meta", tuple((str(k), str(v)) for k, v in dict(self.session_meta).items()))
        object.__setattr__(self, "streams", tuple(self.streams))
        object.__setattr__(self, "tracks", tuple(self.tracks))
        names = [s.name for s in self.streams] + [t.name for t in self.tracks]
        seen = set()
        for n in names:
            if n in seen:
                raise ValueError(f"duplicate stream/track name {n!r}")
            seen.add(n)

    @property
    def session_meta_map(self) -> dict:
        return dict(self.session_meta)


@dataclass(frozen=True)
class JitterReport:
    """Result of checking timestamps against the rate constraint
    ``t[i+1] - t[i] <= 1/rate``. valid is true iff violations is empty."""

    valid: bool
    violations: tuple  # (index, delta_s, limit_s)
    max_delta_s: float
    inferred_rate_hz: Fraction

    def __post_init__(self):
        if self.valid != (len(self.violations) == 0):
            raise ValueError("valid flag inconsistent with violations")

    def render(self) -> str:
        lines = [
            f"inferred rate: {float(self.inferred_rate_hz):.6g} Hz",
            f"max inter-sample gap: {self.max_delta_s:.9g} s",
        ]
        if self.valid:
            lines.append("constraint satisfied: every gap <= 1/rate")
        else:
            lines.append(f"{len(self.violations)} violation(s):")
            for i, delta, limit in self.violations[:20]:
                lines.append(f"  index {i}: gap {delta:.9g} s > limit {limit:.9g} s")
            if len(self.violations) > 20:
                lines.append(f"  ... {len(self.violations) - 20} more")
        return "\n".join(lines)


# Jitter tolerance: relative slack on the 1/rate limit, wide enough to absorb
# decimal-text rounding of timestamps without masking real drift.
JITTER_RELATIVE_TOLERANCE = 1e-9


def validate_uniform(timestamps, rate_hz) -> JitterReport:
    """Check explicit timestamps against the constant-rate constraint.

    Every index i where ``t[i+1] - t[i] > (1/rate) * (1 + 1e-9)`` is reported
    as a violation. Raises NonMonotonicTimestamps on decreasing input.
    """
    rate = as_fraction(rate_hz)
    if rate <= 0:
        raise ValueError("rate_hz must be positive")
    ts = np.asarray(timestamps, dtype=np.float64)
    if ts.ndim != 1:
        raise ValueError("timestamps must be 1-D")
    n = ts.size
    limit = 1.0 / float(rate)
    if n < 2:
        return JitterReport(True, (), 0.0, rate)
    deltas = np.diff(ts)
    neg = np.flatnonzero(deltas < 0)
    if neg.size:
        raise NonMonotonicTimestamps(int(neg[0]) + 1)
    bad = np.flatnonzero(deltas > limit * (1.0 + JITTER_RELATIVE_TOLERANCE))
    violations = tuple((int(i), float(deltas[i]), limit) for i in bad)
    span = ts[-1] - ts[0]
    if span > 0:
        inferred = Fraction(n - 1) / (Fraction(ts[-1]) - Fraction(ts[0]))
    else:
        inferred = rate
    return JitterReport(len(violations) == 0, violations, float(deltas.max()), inferred)


@dataclass(frozen=True)
class Comparison:
    """Equality verdict plus a description of the first difference found."""

    equal: bool
    difference: str | None = None

    def __bool__(self):
        return self.equal


def _samples_identical(a: np.ndarray, b: np.ndarray, fmt: SampleFormat):
    if fmt.is_float:
        # bit-pattern equality so NaN payloads count as preserved
        return np.array_equal(a.view(np.uint32), b.view(np.uint32))
    return np.array_equal(a, b)


def dataset_equal(a: Dataset, b: Dataset) -> Comparison:
    """Exact comparison: streams bit-exact on samples and exact on
    rate/format/channels/meta, tracks exact on events. float32 samples
    compare by bit pattern, so NaNs count as equal to themselves."""
    if len(a.streams) != len(b.streams):
        return Comparison(False, f"stream count {len(a.streams)} != {len(b.streams)}")
    if len(a.tracks) != len(b.tracks):
        return Comparison(False, f"track count {len(a.tracks)} != {len(b.tracks)}")
    if a.session_meta != b.session_meta:
        return Comparison(False, "session metadata differs")
    for sa, sb in zip(a.streams, b.streams):
        for attr in ("name", "rate_hz", "channels", "format", "start_time_s", "meta"):
            va, vb = getattr(sa, attr), getattr(sb, attr)
            if va != vb:
                return Comparison(False, f"stream {sa.name!r}: {attr} {va!r} != {vb!r}")
        if sa.samples.size != sb.samples.size:
            return Comparison(False, f"stream {sa.name!r}: length {sa.samples.size} != {sb.samples.size}")
        if not _samples_identical(sa.samples, sb.samples, sa.format):
            if sa.format.is_float:
                mism = sa.samples.view(np.uint32) != sb.samples.view(np.uint32)
            else:
                mism = sa.samples != sb.samples
            idx = int(np.flatnonzero(mism)[0])
            return Comparison(False, f"stream {sa.name!r}: sample {idx} differs "
                                     f"({sa.samples[idx]!r} != {sb.samples[idx]!r})")
    for ta, tb in zip(a.tracks, b.tracks):
        if ta.name != tb.name:
            return Comparison(False, f"track name {ta.name!r} != {tb.name!r}")
        if len(ta.events) != len(tb.events):
            return Comparison(False, f"track {ta.name!r}: event count {len(ta.events)} != {len(tb.events)}")
        for i, (ea, eb) in enumerate(zip(ta.events, tb.events)):
            if ea != eb:
                return Comparison(False, f"track {ta.name!r}: event {i} differs ({ea} != {eb})")
    return Comparison(True)


@dataclass(frozen=True)
class EncodedFrame:
    """One mux-ready chunk of an encoded track, placed on the session clock."""

    time_s: Fraction
    payload: bytes
    duration_s: Fraction | None = None


@dataclass(frozen=True, eq=False)
class EncodedTrack:
    """Compressed track plus its codec identity and codec-private header.

    For audio codecs ``codec_private + b"".join(frame payloads)`` is a valid
    standalone stream in the codec's native file layout.
    """

    name: str
    codec_id: str
    codec_private: bytes
    frames: tuple
    kind: str  # "audio" | "subtitle"
    rate_hz: Fraction | None = None
    channels: int | None = None
    format: SampleFormat | None = None
    start_time_s: Fraction | None = None
    meta: StreamMeta | None = None
    stats: tuple = ()

    def stream_bytes(self) -> bytes:
        if self.kind != "audio":
            raise TypeError("stream_bytes is only defined for audio tracks")
        return self.codec_private + b"".join(f.payload for f in self.frames)

    @property
    def encoded_size(self) -> int:
        return len(self.codec_private) + sum(len(f.payload) for f in self.frames)

    @property
    def stats_map(self) -> dict:
        return dict(self.stats)


def raw_size_bytes(stream: UniformStream) -> int:
    """Raw binary size of the samples at their own bit width (int24 -> 3 bytes)."""
    return stream.samples.size * (stream.format.bits_per_sample // 8)


def require(condition, exc: Exception):
    if not condition:
        raise exc


__all__ = [
    "SampleFormat", "StreamMeta", "UniformStream", "TimecodedSeries", "Event",
    "SparseTrack", "Dataset", "JitterReport", "validate_uniform", "Comparison",
    "dataset_equal", "EncodedFrame", "EncodedTrack", "raw_size_bytes",
    "as_fraction", "JITTER_RELATIVE_TOLERANCE", "DataError",
]
