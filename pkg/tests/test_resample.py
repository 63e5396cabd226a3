"""Resampling strategies, gap policies and multi-stream alignment."""

import numpy as np
import pytest
from fractions import Fraction

from tspack import (GapError, ResampleStrategy, SampleFormat, TimecodedSeries,
                    UniformStream, align, resample, validate_uniform)

from conftest import profile_stream


def series(times, values, name="s"):
    return TimecodedSeries(name=name, times_s=np.asarray(times, np.float64),
                           values=np.asarray(values, np.float64).reshape(len(times), -1))


LINEAR = ResampleStrategy(kind="linear")
HOLD = ResampleStrategy(kind="hold")
NEAREST = ResampleStrategy(kind="nearest")


class TestStrategies:
    def test_linear_example(self):
        out = resample(series([0, 1], [0, 10]), 4, LINEAR)
        assert out.samples.tolist() == [0, 2.5, 5, 7.5, 10]
        assert out.start_time_s == 0 and out.rate_hz == 4

    def test_hold_example(self):
        out = resample(series([0, 1], [0, 10]), 4, HOLD)
        assert out.samples.tolist() == [0, 0, 0, 0, 10]

    def test_nearest_ties_go_earlier(self):
        out = resample(series([0, 1], [0, 10]), 2, NEAREST)
        # grid 0, 0.5, 1: the midpoint ties to the earlier sample
        assert out.samples.tolist() == [0, 0, 10]

    def test_grid_anchored_at_rate_multiples(self):
        out = resample(series([0.30, 1.0], [1, 2]), 4, HOLD)
        assert out.start_time_s == Fraction(2, 4)  # ceil(0.30 * 4)/4
        assert out.n_frames == 3  # 0.5, 0.75, 1.0

    def test_output_passes_validate_uniform(self):
        rng = np.random.default_rng(0)
        for kind in (LINEAR, HOLD, NEAREST):
            t = np.cumsum(rng.uniform(0.05, 0.2, 100))
            s = series(t, rng.normal(0, 1, 100))
            out = resample(s, 20, ResampleStrategy(kind=kind.kind, gap_policy="fill_hold"))
            rep = validate_uniform(out.timestamps(), out.rate_hz)
            assert rep.valid and not rep.violations

    def test_identity_at_own_rate(self):
        s = profile_stream("unit_range", n=200, rate=50)
        for strat in (LINEAR, HOLD, NEAREST):
            out = resample(s, 50, strat)
            assert out is s  # grid-aligned: returned unchanged, bit-exact

    def test_affine_signal_reproduced_exactly(self):
        t = np.arange(0, 100) * 0.07
        vals = 3.0 * t + 1.0
        out = resample(series(t, vals), 25, LINEAR)
        grid = out.timestamps()
        expect = 3.0 * grid + 1.0
        rel = np.abs(out.samples.astype(np.float64) - expect) / np.maximum(np.abs(expect), 1e-12)
        assert rel.max() <= 1e-6

    def test_empty_series_rejected(self):
        with pytest.raises(Exception, match="empty"):
            resample(series([], np.zeros((0, 1))), 10, HOLD)

    def test_int_stream_keeps_format_on_hold(self):
        s = profile_stream("runlength8", n=60, rate=10)
        out = resample(s, 40, HOLD)
        assert out.format is s.format
        assert out.samples.dtype == s.samples.dtype

    def test_duplicate_timestamps_keep_last(self):
        out = resample(series([0.0, 0.5, 0.5, 1.0], [0, 5, 7, 9]), 2, HOLD)
        assert out.samples.tolist() == [0, 7, 9]


class TestGapPolicy:
    def test_error_policy_names_interval(self):
        s = series([0, 0.1, 0.2, 1.2, 1.3], [1, 2, 3, 4, 5])
        with pytest.raises(GapError) as exc:
            resample(s, 10, ResampleStrategy(kind="hold", gap_policy="error"))
        assert float(exc.value.start_s) == pytest.approx(0.2)
        assert float(exc.value.end_s) == pytest.approx(1.2)

    def test_fill_hold_bridges_gap(self):
        s = series([0, 0.1, 0.2, 1.2], [1, 2, 3, 4])
        out = resample(s, 10, ResampleStrategy(kind="linear", gap_policy="fill_hold"))
        # grid points inside (0.2, 1.2) hold the value at 0.2
        inside = out.samples[3:12]
        assert np.all(inside == np.float32(3))

    def test_fill_nan_marks_gap(self):
        s = series([0, 0.1, 0.2, 1.2], [1, 2, 3, 4])
        out = resample(s, 10, ResampleStrategy(kind="linear", gap_policy="fill_nan"))
        assert np.isnan(out.samples[3:12]).all()
        assert not np.isnan(out.samples[:3]).any()

    def test_fill_nan_invalid_for_int_output(self):
        s = profile_stream("runlength8", n=50, rate=10)
        with pytest.raises(ValueError, match="fill_nan"):
            resample(s, 40, ResampleStrategy(kind="hold", gap_policy="fill_nan"))

    def test_default_threshold_tolerates_one_missing_sample(self):
        # one dropped sample (gap of 2 intervals) passes; two (3 intervals) flags
        t_ok = [0.0, 0.1, 0.3, 0.4]
        resample(series(t_ok, [1, 2, 3, 4]), 10,
                 ResampleStrategy(kind="hold", gap_policy="error"))
        t_bad = [0.0, 0.1, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        with pytest.raises(GapError):
            resample(series(t_bad, np.arange(8)), 10,
                     ResampleStrategy(kind="hold", gap_policy="error"))


class TestAlign:
    def test_slow_plus_fast_meet_at_fast_rate(self):
        slow = profile_stream("unit_range", n=30, rate=3, seed=1)
        fast = profile_stream("wide_range", n=1000, rate=100, seed=2)
        out_slow, out_fast = align([slow, fast])
        assert out_slow.rate_hz == out_fast.rate_hz == 100
        assert out_slow.start_time_s == out_fast.start_time_s
        assert out_slow.n_frames == out_fast.n_frames

    def test_single_stream_unchanged(self):
        s = profile_stream("unit_range", n=100, rate=10)
        (out,) = align([s])
        assert out is s

    def test_two_identical_streams(self):
        s = profile_stream("noise", n=100, rate=10, seed=3)
        s2 = UniformStream(name="copy", rate_hz=s.rate_hz, channels=s.channels,
                           format=s.format, samples=s.samples)
        a, b = align([s, s2])
        assert np.array_equal(a.samples, b.samples)

    def test_outputs_share_grid_and_pass_validation(self):
        streams = [profile_stream("unit_range", n=40, rate=4, seed=4),
                   profile_stream("wide_range", n=300, rate=30, seed=5),
                   profile_stream("runlength8", n=70, rate=7, seed=6)]
        outs = align(streams)
        keys = {(o.start_time_s, o.rate_hz, o.n_frames) for o in outs}
        assert len(keys) == 1
        for o in outs:
            rep = validate_uniform(o.timestamps(), o.rate_hz)
            assert rep.valid

    def test_no_overlap_rejected(self):
        a = profile_stream("unit_range", n=10, rate=10, seed=1)
        late = UniformStream(name="late", rate_hz=10, channels=1, format=a.format,
                             samples=a.samples[:10], start_time_s=Fraction(100))
        with pytest.raises(Exception, match="overlap"):
            align([a, late])

    def test_explicit_target_rate(self):
        s = profile_stream("unit_range", n=100, rate=10)
        (out,) = align([s], target_rate_hz=25)
        assert out.rate_hz == 25

    def test_default_strategy_hold_for_ints(self):
        ints = profile_stream("runlength8", n=20, rate=2, seed=7)
        fast = profile_stream("unit_range", n=1000, rate=100, seed=8)
        out_i, _ = align([ints, fast])
        # hold: every output value is one of the input values
        assert set(np.unique(out_i.samples)) <= set(np.unique(ints.samples))
