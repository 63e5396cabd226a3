"""SSA serialization: layout, fixed point, quantization, derived events."""

import numpy as np
import pytest
from fractions import Fraction

from tspack import (Event, SparseTrack, SsaError, TimecodedSeries,
                    events_from_low_rate_stream, ssa_parse, ssa_serialize)
from tspack.ssa import MIN_EVENT_DURATION, format_timestamp, parse_timestamp

from conftest import centisecond_track


def quantized(track: SparseTrack) -> SparseTrack:
    """What a serialize/parse cycle preserves: centisecond times and the
    minimum-duration rule for instantaneous events."""
    def q(f):
        return Fraction((f * 100 + Fraction(1, 2)).__floor__(), 100)
    events = tuple(Event(time_s=q(e.time_s), payload=e.payload,
                         duration_s=max(q(e.duration_s), MIN_EVENT_DURATION),
                         position=e.position)
                   for e in track.events)
    return SparseTrack(name=track.name, events=events)


class TestTimestamps:
    def test_format_example(self):
        assert format_timestamp(Fraction(372345, 100)) == "1:02:03.45"

    def test_parse_inverse(self):
        assert parse_timestamp("1:02:03.45") == Fraction(372345, 100)
        assert parse_timestamp("0:00:00.00") == 0
        assert parse_timestamp("10:59:59.99") == Fraction(3959999, 100)

    def test_millisecond_separator_variants(self):
        assert parse_timestamp("0:00:01.500") == Fraction(3, 2)
        assert parse_timestamp("0:00:01:50") == Fraction(3, 2)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_timestamp("12.34.56")


class TestSerialize:
    def test_dialogue_line_example(self):
        track = SparseTrack(name="t", events=(
            Event(time_s=Fraction(372345, 100), duration_s=Fraction(1), payload="chop"),))
        text = ssa_serialize(track)
        assert "Dialogue: 0,1:02:03.45,1:02:04.45,Default,,0,0,0,,chop" in text

    def test_instantaneous_event_gets_minimum_duration(self):
        track = SparseTrack(name="t", events=(Event(time_s=0, payload="x"),))
        assert "Dialogue: 0,0:00:00.00,0:00:00.01,Default,,0,0,0,,x" in ssa_serialize(track)

    def test_position_override_prefix(self):
        track = SparseTrack(name="t", events=(
            Event(time_s=Fraction(1), payload="obj", position=(12, 34)),))
        assert r"{\pos(12,34)}obj" in ssa_serialize(track)

    def test_newline_escaped_as_backslash_n(self):
        track = SparseTrack(name="t", events=(Event(time_s=0, payload="two\nlines"),))
        text = ssa_serialize(track)
        assert "two\\Nlines" in text
        assert "two\nlines" not in text

    def test_deterministic(self):
        track = centisecond_track(seed=1)
        assert ssa_serialize(track) == ssa_serialize(track)


class TestParse:
    def test_round_trip_with_quantization(self):
        rng = np.random.default_rng(2)
        events = tuple(
            Event(time_s=Fraction(int(rng.integers(0, 10 ** 6)), 1000),  # ms grid
                  duration_s=Fraction(int(rng.integers(0, 5000)), 1000),
                  payload=f"ev{i}",
                  position=(int(rng.integers(0, 100)), int(rng.integers(0, 100))) if i % 4 == 0 else None)
            for i in range(200))
        track = SparseTrack(name="r", events=events)
        parsed = ssa_parse(ssa_serialize(track)).to_sparse_track("r")
        expect = quantized(track)
        assert len(parsed.events) == len(expect.events)
        for got, want in zip(parsed.events, expect.events):
            assert got == want

    def test_serialize_parse_serialize_fixed_point(self):
        for seed in range(5):
            text = ssa_serialize(centisecond_track(seed=seed, n=40))
            again = ssa_parse(text).serialize()
            assert again == text

    def test_unknown_section_preserved(self):
        track = SparseTrack(name="t", events=(Event(time_s=0, payload="x"),))
        text = ssa_serialize(track)
        with_fonts = text.replace("[Events]", "[Fonts]\nfontname: foo.ttf\n\n[Events]")
        doc = ssa_parse(with_fonts)
        out = doc.serialize()
        assert "[Fonts]" in out and "fontname: foo.ttf" in out
        assert ssa_parse(out).serialize() == out  # still a fixed point

    def test_end_before_start_names_line(self):
        track = SparseTrack(name="t", events=(Event(time_s=Fraction(2), payload="x"),))
        text = ssa_serialize(track).replace("0:00:02.00,0:00:02.01", "0:00:02.00,0:00:01.00")
        with pytest.raises(SsaError) as exc:
            ssa_parse(text)
        assert exc.value.line is not None

    def test_missing_events_section(self):
        with pytest.raises(SsaError, match="Events"):
            ssa_parse("[Script Info]\nTitle: x\n")

    def test_missing_format_line(self):
        with pytest.raises(SsaError, match="Format"):
            ssa_parse("[Events]\nDialogue: 0,0:00:00.00,0:00:00.01,Default,,0,0,0,,x\n")

    def test_malformed_timestamp_names_line(self):
        text = ("[Events]\nFormat: Layer, Start, End, Style, Name, MarginL, MarginR, "
                "MarginV, Effect, Text\nDialogue: 0,banana,0:00:01.00,Default,,0,0,0,,x\n")
        with pytest.raises(SsaError) as exc:
            ssa_parse(text)
        assert exc.value.line == 3

    def test_commas_in_payload_survive(self):
        track = SparseTrack(name="t", events=(Event(time_s=0, payload="a,b,c, d"),))
        parsed = ssa_parse(ssa_serialize(track)).to_sparse_track("t")
        assert parsed.events[0].payload == "a,b,c, d"


class TestLowRateEvents:
    def test_gap_durations_with_cap(self):
        s = TimecodedSeries(name="rfid", times_s=np.array([1.0, 3.0]),
                            values=np.array([[1.0], [2.0]]))
        track = events_from_low_rate_stream(s)
        assert [float(e.duration_s) for e in track.events] == [2.0, 10.0]

    def test_single_row_capped(self):
        s = TimecodedSeries(name="rfid", times_s=np.array([0.5]), values=np.array([[7.0]]))
        track = events_from_low_rate_stream(s)
        assert len(track.events) == 1
        assert float(track.events[0].duration_s) == 10.0

    def test_switch_series_round_trips_time_payload_pairs(self):
        times = np.array([0.25, 1.50, 2.75, 4.00])
        values = np.array([[0.0], [1.0], [0.0], [1.0]])
        s = TimecodedSeries(name="switch", times_s=times, values=values)
        track = events_from_low_rate_stream(s)
        back = ssa_parse(ssa_serialize(track)).to_sparse_track("switch")
        got = [(float(e.time_s), e.payload) for e in back.events]
        want = [(float(e.time_s), e.payload) for e in track.events]
        assert got == want

    def test_custom_formatter(self):
        s = TimecodedSeries(name="x", times_s=np.array([0.0]), values=np.array([[1.0, 2.0]]))
        track = events_from_low_rate_stream(s, formatter=lambda row: f"tag:{int(row[0])}")
        assert track.events[0].payload == "tag:1"
