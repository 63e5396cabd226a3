import numpy as np
import pytest
from fractions import Fraction

from tspack import Dataset, Event, SampleFormat, SparseTrack, UniformStream
from tspack import bench

ALL_FORMATS = (SampleFormat.INT8, SampleFormat.INT16, SampleFormat.INT24,
               SampleFormat.FLOAT32)


def profile_stream(kind, n=1000, rate=100, channels=1, seed=0, fmt=None):
    p = bench.SyntheticProfile(kind=kind, duration_s=Fraction(n) / Fraction(rate),
                               rate_hz=Fraction(rate), channels=channels,
                               seed=seed, fmt=fmt)
    return bench.generate(p)


def random_int_stream(fmt, n=500, channels=1, seed=0, rate=100, name="rand"):
    rng = np.random.default_rng(seed)
    lo, hi = fmt.min_value, fmt.max_value
    samples = rng.integers(lo, hi + 1, n * channels).astype(fmt.dtype)
    return UniformStream(name=name, rate_hz=Fraction(rate), channels=channels,
                         format=fmt, samples=samples)


def random_float_stream(n=500, channels=1, seed=0, rate=100, name="randf",
                        with_nan=False):
    rng = np.random.default_rng(seed)
    samples = rng.normal(0, 1, n * channels).astype(np.float32)
    if with_nan:
        samples[::17] = np.nan
        if samples.size > 3:
            samples[3] = np.inf
    return UniformStream(name=name, rate_hz=Fraction(rate), channels=channels,
                         format=SampleFormat.FLOAT32, samples=samples)


def centisecond_track(seed=0, n=20, name="labels"):
    """Random sparse track with centisecond-aligned times (exact in both the
    subtitle text format and the container tick grid)."""
    rng = np.random.default_rng(seed)
    times = np.sort(rng.integers(0, 60_000, n))
    events = []
    for i, t_cs in enumerate(times):
        dur_cs = int(rng.integers(0, 500))
        payload = f"event {i}: " + "".join(rng.choice(list("abcxyz ,;!")) for _ in range(5))
        pos = (int(rng.integers(0, 640)), int(rng.integers(0, 480))) if i % 3 == 0 else None
        events.append(Event(time_s=Fraction(int(t_cs), 100), payload=payload,
                            duration_s=Fraction(dur_cs, 100), position=pos))
    return SparseTrack(name=name, events=tuple(events))


@pytest.fixture(scope="session")
def corpus():
    """Small profile x format matrix of datasets, each with an annotation track."""
    sets = []
    for kind in bench.PROFILE_KINDS:
        for fmt in ALL_FORMATS:
            stream = profile_stream(kind, n=600, channels=2, seed=5, fmt=fmt)
            ds = Dataset(session_meta=(("description", f"{kind}/{fmt.kind}"),),
                         streams=(stream,), tracks=(centisecond_track(seed=7),))
            sets.append(ds)
    return sets
