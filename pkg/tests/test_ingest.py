"""CSV and raw-f32 ingest: parse shapes, errors, round trips, streaming."""

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tspack import CsvError, CsvSpec, SampleFormat, TimecodedSeries, UniformStream
from tspack import read_csv, read_f32, write_csv, write_f32
from tspack.errors import DataError


class TestReadCsv:
    def test_time_coded(self):
        out = read_csv(b"0.0,1\n0.01,2\n", CsvSpec(time_column=0))
        assert isinstance(out, TimecodedSeries)
        assert out.times_s.tolist() == [0.0, 0.01]
        assert out.values.reshape(-1).tolist() == [1.0, 2.0]

    def test_constant_rate(self):
        out = read_csv(b"1\n2\n3\n", CsvSpec(), rate_hz=100)
        assert isinstance(out, UniformStream)
        assert out.rate_hz == 100 and out.channels == 1
        assert out.format is SampleFormat.FLOAT32
        assert out.samples.tolist() == [1.0, 2.0, 3.0]

    def test_ragged_row_names_line(self):
        with pytest.raises(CsvError) as exc:
            read_csv(b"0,1\n0,1,2\n", CsvSpec(), rate_hz=1)
        assert exc.value.line == 2

    def test_non_numeric_cell_names_line_and_column(self):
        with pytest.raises(CsvError) as exc:
            read_csv(b"1,2\n3,oops\n", CsvSpec(), rate_hz=1)
        assert exc.value.line == 2 and exc.value.column == 1

    def test_empty_file_rejected(self):
        with pytest.raises(CsvError):
            read_csv(b"", CsvSpec(), rate_hz=1)

    def test_scientific_notation_accepted(self):
        out = read_csv(b"1e-3\n2.5E2\n", CsvSpec(), rate_hz=1)
        assert out.samples.tolist() == pytest.approx([0.001, 250.0])

    def test_missing_rate_rejected(self):
        with pytest.raises(CsvError):
            read_csv(b"1\n", CsvSpec())

    def test_int_format_parses_integers(self):
        out = read_csv(b"-5,7\n1,2\n", CsvSpec(), rate_hz=10, fmt=SampleFormat.INT16)
        assert out.format is SampleFormat.INT16
        assert out.samples.dtype == np.int16
        assert out.frames_2d().tolist() == [[-5, 7], [1, 2]]

    def test_int_format_rejects_decimals(self):
        with pytest.raises(CsvError):
            read_csv(b"1.5\n", CsvSpec(), rate_hz=10, fmt=SampleFormat.INT8)

    def test_header_skipped(self):
        out = read_csv(b"a,b\n1,2\n", CsvSpec(has_header=True), rate_hz=10)
        assert out.n_frames == 1

    def test_delimiter_validation(self):
        with pytest.raises(ValueError):
            CsvSpec(delimiter=".")
        with pytest.raises(ValueError):
            CsvSpec(delimiter="5")
        CsvSpec(delimiter=";")

    def test_time_column_in_any_position(self):
        out = read_csv(b"1,0.5,2\n3,1.0,4\n", CsvSpec(time_column=1))
        assert out.times_s.tolist() == [0.5, 1.0]
        assert out.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]


class TestWriteCsv:
    def test_fixed_point_formatting(self):
        s = UniformStream(name="x", rate_hz=1, channels=1, format=SampleFormat.FLOAT32,
                          samples=np.array([1, 2], np.float32))
        assert write_csv(s, CsvSpec()) == b"1.000000\n2.000000\n"

    def test_no_trailing_delimiter_lf_endings(self):
        s = UniformStream(name="x", rate_hz=1, channels=2, format=SampleFormat.FLOAT32,
                          samples=np.array([1, 2, 3, 4], np.float32))
        blob = write_csv(s, CsvSpec(decimal_digits=2))
        assert blob == b"1.00,2.00\n3.00,4.00\n"

    def test_int_stream_written_as_integers(self):
        s = UniformStream(name="x", rate_hz=1, channels=1, format=SampleFormat.INT8,
                          samples=np.array([-3, 100], np.int8))
        assert write_csv(s, CsvSpec()) == b"-3\n100\n"

    def test_round_trip_exact_at_declared_digits(self):
        vals = np.array([0.5, 0.125, 3.25, -1.0], np.float32)  # <= 6 decimals each
        s = UniformStream(name="x", rate_hz=1, channels=1, format=SampleFormat.FLOAT32,
                          samples=vals)
        out = read_csv(write_csv(s, CsvSpec()), CsvSpec(), rate_hz=1)
        assert np.array_equal(out.samples, vals)

    def test_timecoded_round_trip(self):
        ts = TimecodedSeries(name="t", times_s=np.array([0.25, 0.5]),
                             values=np.array([[1.5], [2.5]]))
        blob = write_csv(ts, CsvSpec(time_column=0))
        out = read_csv(blob, CsvSpec(time_column=0))
        assert np.array_equal(out.times_s, ts.times_s)
        assert np.array_equal(out.values, ts.values)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=120, deadline=None)
    def test_float32_noise_round_trip_error_bound(self, seed):
        rng = np.random.default_rng(seed)
        vals = rng.uniform(-1, 1, 64).astype(np.float32)
        s = UniformStream(name="x", rate_hz=1, channels=1,
                          format=SampleFormat.FLOAT32, samples=vals)
        blob = write_csv(s, CsvSpec())
        # decimal quantization alone: within half of the last written digit
        text_vals = np.array([float(line) for line in blob.decode().splitlines()])
        assert np.max(np.abs(text_vals - vals.astype(np.float64))) <= 5e-7
        # float32 re-parse adds at most one unit in the last place
        out = read_csv(blob, CsvSpec(), rate_hz=1)
        ulp = np.spacing(np.abs(vals.astype(np.float64)).max())
        assert np.max(np.abs(out.samples.astype(np.float64) - vals.astype(np.float64))) <= 5e-7 + ulp


class TestRawF32:
    def test_known_bit_pattern(self):
        s = UniformStream(name="x", rate_hz=1, channels=1, format=SampleFormat.FLOAT32,
                          samples=np.array([1.0], np.float32))
        assert write_f32(s) == bytes([0x00, 0x00, 0x80, 0x3F])

    def test_empty(self):
        s = UniformStream(name="x", rate_hz=1, channels=1, format=SampleFormat.FLOAT32,
                          samples=np.zeros(0, np.float32))
        assert write_f32(s) == b""
        assert read_f32(b"", 1, 1).n_frames == 0

    def test_length_validation(self):
        with pytest.raises(DataError):
            read_f32(b"\x00" * 10, 1, 1)
        with pytest.raises(DataError):
            read_f32(b"\x00" * 12, 2, 1)

    def test_random_round_trip_bit_exact(self):
        rng = np.random.default_rng(9)
        patterns = rng.integers(0, 1 << 32, 100_000, dtype=np.uint32)
        vals = patterns.view(np.float32)  # includes NaNs and infinities
        s = UniformStream(name="x", rate_hz=1, channels=4, format=SampleFormat.FLOAT32,
                          samples=vals)
        out = read_f32(write_f32(s), 4, 1)
        assert np.array_equal(out.samples.view(np.uint32), patterns)

    def test_int_stream_rejected(self):
        s = UniformStream(name="x", rate_hz=1, channels=1, format=SampleFormat.INT16,
                          samples=np.zeros(2, np.int16))
        with pytest.raises(DataError):
            write_f32(s)


class _MeteredRaw(io.RawIOBase):
    """Counts every read; fails the test budget if the parser slurps."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self.reads = []

    def readable(self):
        return True

    def readinto(self, b):
        n = min(len(b), len(self._data) - self._pos)
        b[:n] = self._data[self._pos:self._pos + n]
        self._pos += n
        self.reads.append(n)
        return n


class TestStreaming:
    def test_single_pass_chunked_reads(self):
        rows = b"".join(b"%d.500000\n" % i for i in range(50_000))
        raw = _MeteredRaw(rows)
        src = io.BufferedReader(raw, buffer_size=1 << 16)
        out = read_csv(src, CsvSpec(), rate_hz=100)
        assert out.n_frames == 50_000
        assert sum(raw.reads) == len(rows)  # one pass, nothing re-read
        assert max(raw.reads) <= 1 << 16  # bounded buffering, never a slurp
        # output array plus one chunk stays within twice the input size
        assert out.samples.nbytes + (1 << 16) <= 2 * len(rows)
