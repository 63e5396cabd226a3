"""CSV and raw-f32 ingest/egress.

CSV comes in two shapes: constant-rate files (samples only, rate declared
out of band) and time-coded files (one column holds per-row timestamps).
Output formatting is fixed-point with a configurable digit count so text
sizes are reproducible; raw .f32 files are headerless little-endian IEEE-754
interleaved samples.

The reader streams line by line and never buffers more than one line of
input plus the growing output arrays.
"""

import array
import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CsvError, DataError
from .model import (SampleFormat, StreamMeta, TimecodedSeries, UniformStream,
                    as_fraction)


@dataclass(frozen=True)
class CsvSpec:
    delimiter: str = ","
    has_header: bool = False
    time_column: int | None = None  # absent -> constant-rate file
    decimal_digits: int = 6

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")
        if self.delimiter.isdigit() or self.delimiter in "+-.":
            raise ValueError("delimiter must not be a digit, sign or decimal point")
        if self.decimal_digits < 0:
            raise ValueError("decimal_digits must be non-negative")


def _open_source(source) -> io.BufferedIOBase:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source))
    return source


def read_csv(source, spec: CsvSpec, rate_hz=None, name: str = "csv",
             fmt: SampleFormat | None = None, start_time_s=0,
             meta: StreamMeta | None = None):
    """Parse CSV bytes or a binary file-like object.

    Constant-rate files (spec.time_column is None, rate_hz required) yield a
    UniformStream; time-coded files yield a TimecodedSeries for the
    resampler. fmt selects the sample format of constant-rate output
    (default float32); integer formats require integer-valued cells.
    """
    if spec.time_column is None and rate_hz is None:
        raise CsvError("constant-rate CSV needs an explicit rate_hz")
    fmt = fmt or SampleFormat.FLOAT32
    meta = meta or StreamMeta()
    delim = spec.delimiter.encode()
    src = _open_source(source)

    times = array.array("d")
    values = array.array("d")
    n_cols = None
    want_int = not fmt.is_float and spec.time_column is None
    lineno = 0
    data_rows = 0
    for raw in src:
        lineno += 1
        if spec.has_header and lineno == 1:
            continue
        line = raw.rstrip(b"\r\n")
        if not line:
            continue
        cells = line.split(delim)
        if n_cols is None:
            n_cols = len(cells)
            if spec.time_column is not None and spec.time_column >= n_cols:
                raise CsvError(f"time column {spec.time_column} out of range "
                               f"({n_cols} columns)", line=lineno)
        elif len(cells) != n_cols:
            raise CsvError(f"expected {n_cols} columns, found {len(cells)}", line=lineno)
        for col, cell in enumerate(cells):
            is_time = spec.time_column is not None and col == spec.time_column
            try:
                if want_int and not is_time:
                    v = float(int(cell))
                else:
                    v = float(cell)
            except ValueError:
                kind = "integer" if want_int and not is_time else "number"
                raise CsvError(f"cell {cell.decode('utf-8', 'replace')!r} is not a valid {kind}",
                               line=lineno, column=col) from None
            if is_time:
                times.append(v)
            else:
                values.append(v)
        data_rows += 1
    if data_rows == 0:
        raise CsvError("no data rows in CSV input")

    if spec.time_column is not None:
        cols = n_cols - 1
        vals = np.frombuffer(values, dtype=np.float64).reshape(data_rows, cols)
        return TimecodedSeries(name=name, times_s=np.frombuffer(times, dtype=np.float64),
                               values=vals, meta=meta)

    vals = np.frombuffer(values, dtype=np.float64)
    if not fmt.is_float:
        ints = vals.astype(np.int64)
        if fmt in (SampleFormat.INT8, SampleFormat.INT16, SampleFormat.INT24, SampleFormat.INT32):
            lo, hi = fmt.min_value, fmt.max_value
            if ints.size and (ints.min() < lo or ints.max() > hi):
                bad = int(np.flatnonzero((ints < lo) | (ints > hi))[0])
                raise CsvError(f"value {int(ints[bad])} outside {fmt.kind} range",
                               line=bad // n_cols + 1)
        samples = ints.astype(fmt.dtype)
    else:
        samples = vals.astype(np.float32)
    return UniformStream(name=name, rate_hz=as_fraction(rate_hz), channels=n_cols,
                         format=fmt, samples=samples,
                         start_time_s=as_fraction(start_time_s), meta=meta)


def _format_cell(v, digits: int, is_float: bool) -> str:
    return f"{v:.{digits}f}" if is_float else str(int(v))


def write_csv(obj, spec: CsvSpec) -> bytes:
    """Deterministic CSV: fixed decimal digits, LF line endings, no trailing
    delimiter. read_csv(write_csv(x)) reproduces x up to the digit count."""
    d = spec.delimiter
    digits = spec.decimal_digits
    out = []
    if isinstance(obj, UniformStream):
        is_float = obj.format.is_float
        rows = obj.frames_2d()
        if spec.has_header:
            out.append(d.join(f"c{i}" for i in range(obj.channels)))
        if is_float:
            fmt_str = f"%.{digits}f"
            for row in rows:
                out.append(d.join(fmt_str % x for x in row))
        else:
            for row in rows:
                out.append(d.join(str(int(x)) for x in row))
    elif isinstance(obj, TimecodedSeries):
        if spec.has_header:
            out.append(d.join(["time"] + [f"c{i}" for i in range(obj.columns)]))
        fmt_str = f"%.{digits}f"
        for t, row in zip(obj.times_s, obj.values):
            out.append(fmt_str % t + "".join(d + fmt_str % x for x in row))
    else:
        raise TypeError("write_csv expects a UniformStream or TimecodedSeries")
    return ("\n".join(out) + "\n").encode() if out else b""


def read_f32(data: bytes, channels: int, rate_hz, name: str = "f32",
             start_time_s=0, meta: StreamMeta | None = None) -> UniformStream:
    """Headerless little-endian IEEE-754 float32, channel-interleaved."""
    if channels < 1:
        raise DataError("channels must be >= 1")
    if len(data) % (4 * channels):
        raise DataError(f"f32 byte length {len(data)} not divisible by 4 x {channels} channels")
    samples = np.frombuffer(data, dtype="<f4").astype(np.float32)
    return UniformStream(name=name, rate_hz=as_fraction(rate_hz), channels=channels,
                         format=SampleFormat.FLOAT32, samples=samples,
                         start_time_s=as_fraction(start_time_s), meta=meta or StreamMeta())


def write_f32(stream: UniformStream) -> bytes:
    if stream.format is not SampleFormat.FLOAT32:
        raise DataError("write_f32 requires a float32 stream")
    return stream.samples.astype("<f4").tobytes()
