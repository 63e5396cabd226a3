"""Command-line interface: pack, unpack, info, validate, bench.

Exit codes: 0 success, 1 usage or I/O error, 2 data-validity failure.
Set TSC_INSTRUMENT=1 to print the demuxer's byte-read counter on unpack.
"""

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import mkv, ssa
from . import packer
from .errors import DataError, JitterViolation, TspackError, UsageError
from .ingest import CsvSpec, read_csv, read_f32, write_csv, write_f32
from .manifest import load_manifest
from .model import (Dataset, SampleFormat, SparseTrack, StreamMeta,
                    TimecodedSeries, UniformStream, validate_uniform)
from .resample import ResampleStrategy, align, default_strategy_for, resample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; keep 1 for usage
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_file(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _meta_for(spec) -> StreamMeta:
    return StreamMeta(units=spec.units, si_conversion_factor=spec.si_factor,
                      range_min=spec.range_min, range_max=spec.range_max,
                      extra=tuple(spec.extra.items()))


def _load_input(spec, digits: int):
    data = _read_file(spec.path)
    if spec.kind == "f32":
        return read_f32(data, channels=spec.channels, rate_hz=spec.rate_hz,
                        name=spec.name, meta=_meta_for(spec))
    cspec = CsvSpec(delimiter=spec.delimiter, has_header=spec.has_header,
                    time_column=spec.time_column, decimal_digits=digits)
    return read_csv(data, cspec, rate_hz=spec.rate_hz, name=spec.name,
                    fmt=spec.format, meta=_meta_for(spec))


def _load_annotation(spec) -> SparseTrack:
    data = _read_file(spec.path)
    if spec.kind == "ssa":
        doc = ssa.ssa_parse(data.decode("utf-8"))
        return doc.to_sparse_track(spec.name)
    cspec = CsvSpec(delimiter=spec.delimiter, has_header=spec.has_header,
                    time_column=spec.time_column)
    series = read_csv(data, cspec, name=spec.name)
    return ssa.events_from_low_rate_stream(series, name=spec.name)


def cmd_pack(args) -> int:
    m = load_manifest(args.manifest)
    if args.rate is not None:
        m.rate = Fraction(args.rate)
    if args.strategy is not None:
        m.strategy = args.strategy
    if args.repair:
        m.repair = True
    if args.output is not None:
        m.output = Path(args.output)

    strategy = ResampleStrategy(kind=m.strategy) if m.strategy else None
    streams = []
    for spec in m.inputs:
        loaded = _load_input(spec, m.digits)
        if isinstance(loaded, TimecodedSeries):
            if spec.rate_hz is not None:
                report = validate_uniform(loaded.times_s, spec.rate_hz)
                if not report.valid and not m.repair:
                    raise JitterViolation(report, name=spec.name)
                if report.valid:
                    # rate constraint holds: adopt the declared grid as-is
                    fmt = spec.format or SampleFormat.FLOAT32
                    samples = (loaded.values.astype(np.float32).reshape(-1)
                               if fmt.is_float else
                               np.rint(loaded.values).astype(fmt.dtype).reshape(-1))
                    streams.append(UniformStream(
                        name=spec.name, rate_hz=spec.rate_hz, channels=loaded.columns,
                        format=fmt, samples=samples,
                        start_time_s=Fraction(float(loaded.times_s[0])),
                        meta=loaded.meta))
                    continue
                target = spec.rate_hz
            else:
                target = m.rate
                if target is None:
                    raise UsageError(f"time-coded input {spec.name!r} needs rate_hz "
                                     "or an options rate")
            streams.append(resample(loaded, target,
                                    strategy or default_strategy_for(spec.format)))
        else:
            streams.append(loaded)

    if m.rate is not None and streams:
        streams = align(streams, m.rate, strategy)

    tracks = [_load_annotation(a) for a in m.annotations]
    dataset = Dataset(session_meta=tuple(m.session.items()),
                      streams=tuple(streams), tracks=tuple(tracks))
    options = mkv.MuxOptions(cluster_seconds=m.cluster_seconds)
    encoded = packer.encode_dataset(dataset, block_seconds=m.cluster_seconds)
    blob = mkv.mux(dataset, encoded, options)
    m.output.write_bytes(blob)

    print(f"wrote {m.output} ({len(blob)} bytes)")
    for et in encoded:
        raw = dict(et.stats).get("raw_bytes")
        enc = et.encoded_size
        if raw:
            print(f"  {et.name}: {et.codec_id} {raw} -> {enc} bytes "
                  f"(x{enc / raw:.3f})")
        else:
            print(f"  {et.name}: {et.codec_id} {enc} bytes, {len(et.frames)} events")
    return EXIT_OK


def _parse_window(text: str):
    a, sep, b = text.partition(":")
    if not sep:
        raise UsageError("--window expects t0:t1 in seconds")
    try:
        return Fraction(a), Fraction(b)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad window {text!r}") from None


def cmd_unpack(args) -> int:
    data = _read_file(args.container)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    m = mkv.demux(data)
    available = [tr.name for tr in m.tracks]
    if args.tracks:
        wanted = args.tracks.split(",")
        missing = [w for w in wanted if w not in available]
        if missing:
            raise DataError(f"unknown track(s) {missing}; available: {available}")
    else:
        wanted = available

    spec = CsvSpec(decimal_digits=args.digits)
    if args.window:
        t0, t1 = _parse_window(args.window)
        results, used_cues = packer.unpack_window(m, wanted, t0, t1)
        if not used_cues:
            print("warning: container has no cue index; linear scan", file=sys.stderr)
        items = results.items()
    else:
        ds = packer.unpack(m)
        items = [(s.name, s) for s in ds.streams if s.name in wanted]
        items += [(t.name, t) for t in ds.tracks if t.name in wanted]

    for name, obj in items:
        if isinstance(obj, UniformStream):
            if args.format == "f32":
                path = outdir / f"{name}.f32"
                stream = obj if obj.format.is_float else UniformStream(
                    name=obj.name, rate_hz=obj.rate_hz, channels=obj.channels,
                    format=SampleFormat.FLOAT32,
                    samples=obj.samples.astype(np.float32),
                    start_time_s=obj.start_time_s, meta=obj.meta)
                path.write_bytes(write_f32(stream))
            else:
                path = outdir / f"{name}.csv"
                path.write_bytes(write_csv(obj, spec))
            print(f"  {path} ({obj.n_frames} samples at {float(obj.rate_hz):g} Hz, "
                  f"start {float(obj.start_time_s):g} s)")
        else:
            path = outdir / f"{name}.ass"
            path.write_text(ssa.ssa_serialize(obj), encoding="utf-8")
            print(f"  {path} ({len(obj.events)} events)")

    if os.environ.get("TSC_INSTRUMENT") == "1":
        print(f"bytes read: {m.bytes_read} of {len(data)} "
              f"({100.0 * m.bytes_read / max(1, len(data)):.2f}%)")
    return EXIT_OK


def cmd_info(args) -> int:
    data = _read_file(args.container)
    m = mkv.demux(data)
    dur = (m.duration_ticks or 0) * m.timestamp_scale_ns / 1e9
    print(f"container: {args.container}")
    print(f"  doc type: {m.doc_type}, timestamp scale {m.timestamp_scale_ns} ns, "
          f"duration {dur:.3f} s")
    print(f"  writing app: {m.writing_app}")
    if m.session_tags:
        print("  session metadata:")
        for k, v in m.session_tags.items():
            print(f"    {k} = {v}")
    cues = m.cues()
    for tr in m.tracks:
        kind = {mkv.TRACK_TYPE_AUDIO: "audio", mkv.TRACK_TYPE_SUBTITLE: "subtitle"}.get(
            tr.track_type, f"type{tr.track_type}")
        line = f"  track {tr.number}: {kind} {tr.name!r} codec {tr.codec_id}"
        if tr.sampling_frequency:
            line += f" rate {tr.sampling_frequency:g} Hz"
        if tr.channels:
            line += f" channels {tr.channels}"
        if tr.bit_depth:
            line += f" bits {tr.bit_depth}"
        print(line)
        for k, v in tr.tags.items():
            print(f"    {k} = {v}")
    print(f"  cue points: {len(cues)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    data = _read_file(args.csv)
    spec = CsvSpec(delimiter=args.delimiter, has_header=args.has_header,
                   time_column=args.time_column)
    series = read_csv(data, spec, name=Path(args.csv).stem)
    report = validate_uniform(series.times_s, Fraction(args.rate))
    print(report.render())
    return EXIT_OK if report.valid else EXIT_DATA


def cmd_bench(args) -> int:
    if args.compare_kernels:
        rows = bench_mod.compare_kernels(n=int(float(args.kernel_n)))
        print(bench_mod.kernel_report_text(rows))
        return EXIT_OK
    profiles = args.profiles.split(",") if args.profiles else list(bench_mod.PROFILE_KINDS)
    sizes = [int(float(s)) for s in args.sizes.split(",")]
    report = bench_mod.run(profiles, sizes, digits=args.digits, seed=args.seed)
    print(bench_mod.report_text(report))
    if args.out:
        Path(args.out).write_text(bench_mod.report_machine(report), encoding="utf-8")
        print(f"machine-readable report written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tspack",
                description="Pack multi-rate time-series recordings into Matroska "
                            "(sensor streams as lossless audio, annotations as subtitles).")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pack", help="pack manifest inputs into one .mkv")
    sp.add_argument("manifest", help="manifest file (key=value sections)")
    sp.add_argument("--rate", help="align all streams to this rate (Hz)")
    sp.add_argument("--strategy", choices=("hold", "nearest", "linear"),
                    help="resampling strategy for --rate/--repair")
    sp.add_argument("--repair", action="store_true",
                    help="resample jittery time-coded inputs instead of failing")
    sp.add_argument("--output", help="override the manifest output path")
    sp.set_defaults(fn=cmd_pack)

    su = sub.add_parser("unpack", help="extract tracks back to CSV/f32/ASS files")
    su.add_argument("container")
    su.add_argument("outdir")
    su.add_argument("--format", choices=("csv", "f32"), default="csv")
    su.add_argument("--digits", type=int, default=6, help="CSV decimal digits")
    su.add_argument("--tracks", help="comma-separated track names (default: all)")
    su.add_argument("--window", help="t0:t1 window in seconds (uses the cue index)")
    su.set_defaults(fn=cmd_unpack)

    si = sub.add_parser("info", help="list container metadata, tracks and cues")
    si.add_argument("container")
    si.set_defaults(fn=cmd_info)

    sv = sub.add_parser("validate", help="check a time-coded CSV against a rate")
    sv.add_argument("csv")
    sv.add_argument("--rate", required=True, help="expected rate in Hz")
    sv.add_argument("--time-column", type=int, default=0)
    sv.add_argument("--delimiter", default=",")
    sv.add_argument("--has-header", action="store_true")
    sv.set_defaults(fn=cmd_validate)

    sb = sub.add_parser("bench", help="storage/runtime comparison on synthetic data")
    sb.add_argument("--profiles", help=f"comma-separated subset of {','.join(bench_mod.PROFILE_KINDS)}")
    sb.add_argument("--sizes", default="1e5", help="comma-separated sample counts")
    sb.add_argument("--digits", type=int, default=6)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--out", help="write machine-readable records to this file")
    sb.add_argument("--compare-kernels", action="store_true",
                    help="time numba vs numpy kernel implementations instead")
    sb.add_argument("--kernel-n", default="2e5", help="input size for --compare-kernels")
    sb.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except JitterViolation as e:
        print(f"error: {e}", file=sys.stderr)
        print(e.report.render(), file=sys.stderr)
        return EXIT_DATA
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TspackError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
