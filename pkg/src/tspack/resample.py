"""Rate conversion and multi-stream alignment.

The output grid is anchored at integer multiples of 1/rate on the session
clock (first point ceil(t0*rate)/rate, last point <= the final input time),
which is what lets independently resampled streams share one timeline.
Strategies are hold / nearest / linear only; decimation filters are out of
scope, so downsampling aliases and the default is to upsample to the fastest
input instead.

Duplicate source timestamps keep the last row. Input gaps larger than the
threshold (default two source intervals: one missing sample is tolerated,
two are flagged) are handled per gap_policy.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DataError, GapError
from .model import (SampleFormat, TimecodedSeries, UniformStream, as_fraction)

_KINDS = ("hold", "nearest", "linear")
_GAP_POLICIES = ("fill_hold", "fill_nan", "error")

# relative slack when comparing grid times against source times, to absorb
# float64 rounding of otherwise-coincident instants
_TIME_EPS = 1e-12


@dataclass(frozen=True)
class ResampleStrategy:
    kind: str = "linear"
    gap_policy: str = "error"
    gap_threshold_s: Fraction | None = None  # None -> 2 / source rate

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if self.gap_policy not in _GAP_POLICIES:
            raise ValueError(f"gap_policy must be one of {_GAP_POLICIES}")
        if self.gap_threshold_s is not None:
            object.__setattr__(self, "gap_threshold_s", as_fraction(self.gap_threshold_s))
            if self.gap_threshold_s <= 0:
                raise ValueError("gap_threshold_s must be positive")


def _source_arrays(series):
    """(times f64, values f64 2-D, source rate Fraction|None, format|None, name, meta, start)"""
    if isinstance(series, UniformStream):
        return (series.timestamps(), series.frames_2d().astype(np.float64),
                series.rate_hz, series.format, series.name, series.meta)
    if isinstance(series, TimecodedSeries):
        t = series.times_s
        rate = None
        if t.size >= 2 and t[-1] > t[0]:
            rate = Fraction(t.size - 1) / (Fraction(float(t[-1])) - Fraction(float(t[0])))
        return t, series.values.astype(np.float64), rate, None, series.name, series.meta
    raise TypeError("expected UniformStream or TimecodedSeries")


def _dedup_keep_last(t: np.ndarray, v: np.ndarray):
    if t.size < 2:
        return t, v
    keep = np.append(np.diff(t) > 0, True)
    return t[keep], v[keep]


def _grid_bounds(t0: Fraction, t_end: Fraction, rate: Fraction):
    n0 = math.ceil(t0 * rate)
    n_end = math.floor(t_end * rate)
    return n0, max(0, n_end - n0 + 1)


def _resample_to_grid(t, v, n0: int, count: int, rate: Fraction,
                      strategy: ResampleStrategy, src_rate):
    """Core sampler onto grid points (n0 + i)/rate. Returns float64 (count, ch)."""
    grid = (n0 + np.arange(count, dtype=np.float64)) / float(rate)
    eps = _TIME_EPS * np.maximum(1.0, np.abs(grid))
    # index of last source time <= grid point (with tolerance for equality)
    j = np.searchsorted(t, grid + eps, side="right") - 1
    j = np.clip(j, 0, t.size - 1)

    if strategy.kind == "hold":
        out = v[j]
    elif strategy.kind == "nearest":
        jn = np.minimum(j + 1, t.size - 1)
        right_closer = np.abs(t[jn] - grid) < np.abs(grid - t[j])  # ties -> earlier
        out = v[np.where(right_closer, jn, j)]
    else:
        out = np.column_stack([np.interp(grid, t, v[:, c]) for c in range(v.shape[1])])

    if t.size >= 2 and count:
        if strategy.gap_threshold_s is not None:
            threshold = float(strategy.gap_threshold_s)
        elif src_rate is not None:
            threshold = 2.0 / float(src_rate)
        else:
            threshold = math.inf
        gaps = np.diff(t)
        jg = np.minimum(j, t.size - 2)
        in_gap = (gaps[jg] > threshold * (1 + 1e-9)) & (grid - t[jg] > eps) & (j < t.size - 1)
        if in_gap.any():
            if strategy.gap_policy == "error":
                g = int(np.flatnonzero(in_gap)[0])
                raise GapError(Fraction(float(t[jg[g]])), Fraction(float(t[jg[g] + 1])))
            if strategy.gap_policy == "fill_nan":
                out = out.astype(np.float64, copy=True)
                out[in_gap] = np.nan
            else:  # fill_hold
                out = out.copy()
                out[in_gap] = v[jg[in_gap]]
    return out


def _cast_output(out: np.ndarray, fmt: SampleFormat) -> np.ndarray:
    if fmt.is_float:
        return out.astype(np.float32)
    return np.rint(out).astype(fmt.dtype)


def _is_grid_aligned(stream: UniformStream, rate: Fraction) -> bool:
    return stream.rate_hz == rate and (stream.start_time_s * rate).denominator == 1


def resample(series, target_rate_hz, strategy: ResampleStrategy) -> UniformStream:
    """Convert a time-coded series or uniform stream to the target rate.

    The output starts at ceil(t0*rate)/rate and ends at the last input time.
    Returns the input object unchanged when it is already on the target grid.
    """
    rate = as_fraction(target_rate_hz)
    if rate <= 0:
        raise ValueError("target rate must be positive")
    t, v, src_rate, src_fmt, name, meta = _source_arrays(series)
    if t.size == 0:
        raise DataError(f"cannot resample empty series {name!r}")
    out_fmt = src_fmt if src_fmt is not None else SampleFormat.FLOAT32
    if strategy.gap_policy == "fill_nan" and not out_fmt.is_float:
        raise ValueError("fill_nan is only valid for float32 output")
    if isinstance(series, UniformStream) and _is_grid_aligned(series, rate):
        return series
    t, v = _dedup_keep_last(t, v)
    n0, count = _grid_bounds(Fraction(float(t[0])), Fraction(float(t[-1])), rate)
    out = _resample_to_grid(t, v, n0, count, rate, strategy, src_rate)
    return UniformStream(name=name, rate_hz=rate, channels=v.shape[1], format=out_fmt,
                         samples=_cast_output(out, out_fmt).reshape(-1),
                         start_time_s=Fraction(n0) / rate, meta=meta)


def default_strategy_for(fmt: SampleFormat | None) -> ResampleStrategy:
    """Hold for integer formats (repeating is exact), linear for float32."""
    if fmt is not None and not fmt.is_float:
        return ResampleStrategy(kind="hold")
    return ResampleStrategy(kind="linear")


def align(streams, target_rate_hz=None, strategies=None) -> list:
    """Bring streams onto a common rate, start time and sample count.

    Default target is the fastest input rate (upsample by default, since
    unfiltered downsampling aliases). Output truncates to the overlapping
    time window; per-stream strategy defaults to hold for integer formats
    and linear for float32.
    """
    streams = list(streams)
    if not streams:
        raise ValueError("align needs at least one stream")
    for s in streams:
        if s.n_frames == 0:
            raise DataError(f"cannot align empty stream {s.name!r}")
    rate = as_fraction(target_rate_hz) if target_rate_hz is not None else max(s.rate_hz for s in streams)
    start = max(s.start_time_s for s in streams)
    end = min(s.end_time_s for s in streams)
    if end < start:
        raise DataError("streams have no temporal overlap")
    n0, count = _grid_bounds(start, end, rate)
    if count < 1:
        raise DataError("overlap contains no grid point at the target rate")

    out = []
    for i, s in enumerate(streams):
        if _is_grid_aligned(s, rate) and int(s.start_time_s * rate) == n0 and s.n_frames == count:
            out.append(s)
            continue
        strat = None
        if strategies is not None:
            strat = strategies[i] if not isinstance(strategies, ResampleStrategy) else strategies
        strat = strat or default_strategy_for(s.format)
        if strat.gap_policy == "fill_nan" and not s.format.is_float:
            raise ValueError("fill_nan is only valid for float32 output")
        t, v, src_rate, fmt, name, meta = _source_arrays(s)
        res = _resample_to_grid(t, v, n0, count, rate, strat, src_rate)
        out.append(UniformStream(name=name, rate_hz=rate, channels=s.channels, format=s.format,
                                 samples=_cast_output(res, s.format).reshape(-1),
                                 start_time_s=Fraction(n0) / rate, meta=meta))
    return out
