"""Pack manifest: a flat, line-oriented key=value format with [section]
headers. Sections: [session] (metadata pairs), [input] (one per stream,
repeatable), [annotation] (one per label file, repeatable), [output],
[options]. Keys within a section are order-insensitive; '#' starts a
comment line. Relative paths resolve against the manifest's directory.

Example:

    [session]
    description = morning recording

    [input]
    path = acc.csv
    name = acc
    kind = csv
    rate_hz = 100
    format = int16
    units = m/s^2

    [input]
    path = gps.csv
    name = gps
    kind = csv
    time_column = 0

    [annotation]
    path = labels.ass
    name = labels

    [output]
    path = session.mkv
"""

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ManifestError
from .model import SampleFormat, as_fraction

_INPUT_KEYS = {"path", "kind", "name", "rate_hz", "time_column", "channels",
               "format", "units", "si_factor", "range_min", "range_max",
               "delimiter", "has_header", "decimal_digits"}
_ANNOTATION_KEYS = {"path", "kind", "name", "time_column", "delimiter", "has_header"}
_OPTION_KEYS = {"rate", "strategy", "repair", "digits", "cluster_seconds"}


@dataclass
class InputSpec:
    path: Path
    name: str
    kind: str  # "csv" | "f32"
    rate_hz: Fraction | None = None
    time_column: int | None = None
    channels: int | None = None
    format: SampleFormat | None = None
    units: str = ""
    si_factor: Fraction | None = None
    range_min: Fraction | None = None
    range_max: Fraction | None = None
    delimiter: str = ","
    has_header: bool = False
    extra: dict = field(default_factory=dict)


@dataclass
class AnnotationSpec:
    path: Path
    name: str
    kind: str  # "ssa" | "csv"
    time_column: int = 0
    delimiter: str = ","
    has_header: bool = False


@dataclass
class PackManifest:
    inputs: list
    annotations: list
    session: dict
    output: Path
    rate: Fraction | None = None
    strategy: str | None = None
    repair: bool = False
    digits: int = 6
    cluster_seconds: Fraction = Fraction(5)


def _parse_bool(value: str, line: int) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ManifestError(f"expected a boolean, got {value!r}", line)


def _sections(text: str):
    """Yield (section_name, header_line, {key: (value, line)})."""
    name = None
    header_line = 0
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            if name is not None:
                yield name, header_line, pairs
            name = line[1:-1].strip().lower()
            header_line = lineno
            pairs = {}
            continue
        if name is None:
            raise ManifestError("key before any [section] header", lineno)
        key, sep, value = line.partition("=")
        if not sep:
            raise ManifestError(f"expected key = value, got {line!r}", lineno)
        key = key.strip().lower()
        if key in pairs:
            raise ManifestError(f"duplicate key {key!r} in section", lineno)
        pairs[key] = (value.strip(), lineno)
    if name is not None:
        yield name, header_line, pairs


def _infer_kind(path: Path, declared: str | None, line: int, allowed, what: str) -> str:
    if declared:
        kind = declared.lower()
        if kind not in allowed:
            raise ManifestError(f"unknown {what} kind {declared!r}", line)
        return kind
    suffix = path.suffix.lower()
    if suffix in (".ass", ".ssa"):
        return "ssa"
    if suffix == ".f32":
        return "f32"
    return "csv"


def parse_manifest(text: str, base_dir: Path | None = None) -> PackManifest:
    base = base_dir or Path(".")
    inputs = []
    annotations = []
    session = {}
    output = None
    options = {}

    for name, header_line, pairs in _sections(text):
        def take(key, default=None):
            return pairs.pop(key, (default, header_line))

        if name == "session":
            session.update({k: v for k, (v, _ln) in pairs.items()})
            pairs.clear()
        elif name == "input":
            for k in list(pairs):
                if k not in _INPUT_KEYS and not k.startswith("meta."):
                    raise ManifestError(f"unknown input key {k!r}", pairs[k][1])
            path_v, path_ln = take("path")
            if path_v is None:
                raise ManifestError("input section needs a path", header_line)
            path = base / path_v
            kind_v, kind_ln = take("kind")
            kind = _infer_kind(path, kind_v, kind_ln, ("csv", "f32"), "input")
            name_v, _ = take("name", path.stem)
            rate_v, _ = take("rate_hz")
            tc_v, tc_ln = take("time_column")
            ch_v, ch_ln = take("channels")
            fmt_v, fmt_ln = take("format")
            try:
                fmt = SampleFormat.from_name(fmt_v) if fmt_v else None
            except ValueError as e:
                raise ManifestError(str(e), fmt_ln) from None
            units_v, _ = take("units", "")
            si_v, _ = take("si_factor")
            rmin_v, _ = take("range_min")
            rmax_v, _ = take("range_max")
            delim_v, _ = take("delimiter", ",")
            hh_v, hh_ln = take("has_header")
            extra = {k[len("meta."):]: v for k, (v, _ln) in pairs.items() if k.startswith("meta.")}
            spec = InputSpec(
                path=path, name=name_v, kind=kind,
                rate_hz=as_fraction(rate_v) if rate_v else None,
                time_column=int(tc_v) if tc_v is not None else None,
                channels=int(ch_v) if ch_v is not None else None,
                format=fmt, units=units_v,
                si_factor=as_fraction(si_v) if si_v else None,
                range_min=as_fraction(rmin_v) if rmin_v else None,
                range_max=as_fraction(rmax_v) if rmax_v else None,
                delimiter=delim_v,
                has_header=_parse_bool(hh_v, hh_ln) if hh_v is not None else False,
                extra=extra)
            if kind == "csv" and spec.time_column is None and spec.rate_hz is None:
                raise ManifestError(f"constant-rate input {spec.name!r} needs rate_hz", header_line)
            if kind == "f32":
                if spec.channels is None:
                    raise ManifestError(f"f32 input {spec.name!r} needs channels", header_line)
                if spec.rate_hz is None:
                    raise ManifestError(f"f32 input {spec.name!r} needs rate_hz", header_line)
            inputs.append(spec)
        elif name == "annotation":
            for k in list(pairs):
                if k not in _ANNOTATION_KEYS:
                    raise ManifestError(f"unknown annotation key {k!r}", pairs[k][1])
            path_v, _ = take("path")
            if path_v is None:
                raise ManifestError("annotation section needs a path", header_line)
            path = base / path_v
            kind_v, kind_ln = take("kind")
            kind = _infer_kind(path, kind_v, kind_ln, ("ssa", "csv"), "annotation")
            name_v, _ = take("name", path.stem)
            tc_v, _ = take("time_column", "0")
            delim_v, _ = take("delimiter", ",")
            hh_v, hh_ln = take("has_header")
            annotations.append(AnnotationSpec(
                path=path, name=name_v, kind=kind, time_column=int(tc_v),
                delimiter=delim_v,
                has_header=_parse_bool(hh_v, hh_ln) if hh_v is not None else False))
        elif name == "output":
            path_v, _ = take("path")
            if path_v is None:
                raise ManifestError("output section needs a path", header_line)
            output = base / path_v
            pairs.clear()
        elif name == "options":
            for k in list(pairs):
                if k not in _OPTION_KEYS:
                    raise ManifestError(f"unknown option {k!r}", pairs[k][1])
            options = {k: v for k, v in pairs.items()}
            pairs.clear()
        else:
            raise ManifestError(f"unknown section [{name}]", header_line)

    if not inputs and not annotations:
        raise ManifestError("manifest declares no inputs")
    if output is None:
        raise ManifestError("manifest declares no [output] path")

    names = [i.name for i in inputs] + [a.name for a in annotations]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise ManifestError(f"duplicate stream/track names: {sorted(dupes)}")

    m = PackManifest(inputs=inputs, annotations=annotations, session=session, output=output)
    if "rate" in options:
        m.rate = as_fraction(options["rate"][0])
    if "strategy" in options:
        m.strategy = options["strategy"][0]
    if "repair" in options:
        m.repair = _parse_bool(*options["repair"])
    if "digits" in options:
        m.digits = int(options["digits"][0])
    if "cluster_seconds" in options:
        m.cluster_seconds = as_fraction(options["cluster_seconds"][0])
    return m


def load_manifest(path) -> PackManifest:
    p = Path(path)
    return parse_manifest(p.read_text(encoding="utf-8"), base_dir=p.parent)
