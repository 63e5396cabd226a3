"""Dataset round trips through the container, codec routing, windows."""

import numpy as np
import pytest
from fractions import Fraction

from tspack import (Dataset, Event, SampleFormat, SparseTrack, StreamMeta,
                    UniformStream, dataset_equal, demux, pack, unpack,
                    unpack_window)
from tspack.packer import block_size_for_rate, encode_stream, skeleton

from conftest import centisecond_track, profile_stream, random_float_stream


class TestCodecRouting:
    def test_int_formats_to_flac(self):
        for fmt in (SampleFormat.INT8, SampleFormat.INT16, SampleFormat.INT24):
            s = profile_stream("unit_range", n=64, fmt=fmt)
            assert encode_stream(s).codec_id == "A_FLAC"

    def test_float32_and_int32_to_rice32(self):
        assert encode_stream(random_float_stream(n=64)).codec_id == "A_TS/RICE32"
        s = UniformStream(name="i32", rate_hz=100, channels=1, format=SampleFormat.INT32,
                          samples=np.arange(64, dtype=np.int32) * 100_000)
        assert encode_stream(s).codec_id == "A_TS/RICE32"

    def test_pcm_override(self):
        s = random_float_stream(n=64)
        track = encode_stream(s, codec="pcm_f32")
        assert track.codec_id == "A_PCM/FLOAT/IEEE"

    def test_block_size_power_of_two_near_5s(self):
        assert block_size_for_rate(Fraction(100)) == 512
        assert block_size_for_rate(Fraction(3)) == 16
        assert block_size_for_rate(Fraction(48000)) == 4096
        assert block_size_for_rate(Fraction(1, 10)) == 16


class TestRoundTrip:
    def test_corpus_matrix(self, corpus):
        for ds in corpus:
            out = unpack(pack(ds))
            cmp = dataset_equal(ds, out)
            assert cmp, cmp.difference

    def test_metadata_preserved_exactly(self):
        meta = StreamMeta(units="m/s^2", si_conversion_factor=Fraction(981, 100),
                          range_min=Fraction(-8), range_max=Fraction(8),
                          extra=(("sensor", "adxl345"), ("axis order", "xyz")))
        s = UniformStream(name="acc", rate_hz=Fraction(3, 10), channels=1,
                          format=SampleFormat.FLOAT32,
                          samples=np.arange(12, dtype=np.float32),
                          start_time_s=Fraction(21, 2000), meta=meta)
        ds = Dataset(session_meta=(("description", "exact meta"), ("date_utc", "2017-01-02T03:04:05Z")),
                     streams=(s,))
        out = unpack(pack(ds))
        cmp = dataset_equal(ds, out)
        assert cmp, cmp.difference
        assert out.streams[0].rate_hz == Fraction(3, 10)  # not a float64 value
        assert out.streams[0].start_time_s == Fraction(21, 2000)

    def test_pcm_round_trip(self):
        s = random_float_stream(n=700, channels=2, seed=4)
        ds = Dataset(streams=(s,))
        blob = pack(ds, codec_overrides={s.name: "pcm_f32"})
        out = unpack(blob)
        assert dataset_equal(ds, out)

    def test_subtitle_only_dataset(self):
        ds = Dataset(tracks=(centisecond_track(seed=2),))
        assert dataset_equal(ds, unpack(pack(ds)))

    def test_zero_duration_events_stay_zero(self):
        track = SparseTrack(name="taps", events=(
            Event(time_s=Fraction(1, 100), payload="tap"),
            Event(time_s=Fraction(2), payload="tap2"),))
        ds = Dataset(tracks=(track,))
        out = unpack(pack(ds))
        assert [e.duration_s for e in out.tracks[0].events] == [0, 0]

    def test_skeleton_matches_configs(self, corpus):
        for ds in corpus[:4]:
            sk = skeleton(demux(pack(ds)))
            assert [s.name for s in sk.streams] == [s.name for s in ds.streams]
            for a, b in zip(sk.streams, ds.streams):
                assert a.rate_hz == b.rate_hz
                assert a.format is b.format
                assert a.channels == b.channels
                assert a.start_time_s == b.start_time_s
                assert a.meta == b.meta
                assert a.n_frames == 0
            assert sk.session_meta == ds.session_meta


class TestWindows:
    @pytest.mark.parametrize("fmt,codec", [(SampleFormat.INT16, None),
                                           (SampleFormat.FLOAT32, None),
                                           (SampleFormat.FLOAT32, "pcm_f32")])
    def test_window_equals_slice_of_full(self, fmt, codec):
        s = profile_stream("unit_range", n=6000, channels=2, seed=6, fmt=fmt)
        ds = Dataset(streams=(s,))
        blob = pack(ds, codec_overrides={s.name: codec} if codec else None)
        results, used_cues = unpack_window(blob, [s.name], 20, 25)
        assert used_cues
        frag = results[s.name]
        start_idx = int((frag.start_time_s - s.start_time_s) * s.rate_hz)
        full = s.frames_2d()
        assert np.array_equal(frag.frames_2d(), full[start_idx:start_idx + frag.n_frames])
        assert float(frag.start_time_s) <= 20
        assert float(frag.end_time_s) >= 25 - 1 / 100

    def test_subtitle_window(self):
        events = tuple(Event(time_s=Fraction(i), duration_s=Fraction(1, 2),
                             payload=f"e{i}") for i in range(30))
        ds = Dataset(tracks=(SparseTrack(name="ev", events=events),))
        results, _ = unpack_window(pack(ds), ["ev"], 10, 12)
        got = [e.payload for e in results["ev"].events]
        assert "e10" in got and "e11" in got and "e12" in got
        assert "e20" not in got

    def test_unknown_track_name(self):
        blob = pack(Dataset(streams=(random_float_stream(n=64),)))
        with pytest.raises(Exception, match="no track named"):
            unpack_window(blob, ["missing"], 0, 1)
