"""SubStation Alpha (v4+) serialization for sparse event tracks.

Event text rides in the last comma-separated field, so payload commas need
no escaping; newlines are stored raw in the model and written as the
two-character sequence \\N. Timestamps carry centisecond precision; events
that need finer timing belong in an audio-coded stream, not a subtitle
track. Instantaneous events are written with end = start + 0.01 s so
standard players render them.
"""

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import SsaError
from .model import Event, SparseTrack, TimecodedSeries, as_fraction

STYLES_HEADER = "[V4+ Styles]"
STYLE_FORMAT_LINE = ("Format: Name, Fontname, Fontsize, PrimaryColour, SecondaryColour, "
                     "OutlineColour, BackColour, Bold, Italic, Underline, StrikeOut, "
                     "ScaleX, ScaleY, Spacing, Angle, BorderStyle, Outline, Shadow, "
                     "Alignment, MarginL, MarginR, MarginV, Encoding")
DEFAULT_STYLE_LINE = ("Style: Default,Arial,20,&H00FFFFFF,&H000000FF,&H00000000,&H00000000,"
                      "0,0,0,0,100,100,0,0,1,2,2,2,10,10,10,1")
EVENT_FORMAT_FIELDS = ("Layer", "Start", "End", "Style", "Name",
                       "MarginL", "MarginR", "MarginV", "Effect", "Text")
EVENT_FORMAT_LINE = "Format: " + ", ".join(EVENT_FORMAT_FIELDS)

MIN_EVENT_DURATION = Fraction(1, 100)  # one centisecond, the format's quantum

_TIME_RE = re.compile(r"^(\d+):([0-5]?\d):([0-5]?\d)[.:](\d{1,3})$")
_POS_RE = re.compile(r"^\{\\pos\((-?\d+),(-?\d+)\)\}")


def format_timestamp(t: Fraction) -> str:
    """H:MM:SS.cc with centisecond rounding (half away from zero)."""
    cs = (t * 100 + Fraction(1, 2)).__floor__()
    s, cs = divmod(cs, 100)
    m, s = divmod(s, 60)
    h, m = divmod(m, 60)
    return f"{h}:{m:02d}:{s:02d}.{cs:02d}"


def parse_timestamp(text: str) -> Fraction:
    m = _TIME_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad SSA timestamp {text!r}")
    h, mi, s, frac = m.groups()
    sub = Fraction(int(frac), 10 ** len(frac))
    return Fraction(int(h) * 3600 + int(mi) * 60 + int(s)) + sub


def _escape(payload: str) -> str:
    return payload.replace("\n", "\\N")


def _unescape(text: str) -> str:
    return text.replace("\\N", "\n")


def dialogue_line(event: Event) -> str:
    start = format_timestamp(event.time_s)
    end_t = event.time_s + max(event.duration_s, MIN_EVENT_DURATION)
    end = format_timestamp(end_t)
    text = _escape(event.payload)
    if event.position is not None:
        x, y = event.position
        text = f"{{\\pos({x},{y})}}{text}"
    return f"Dialogue: 0,{start},{end},Default,,0,0,0,,{text}"


@dataclass(frozen=True)
class SsaDocument:
    """A parsed document: raw non-event sections in order, plus the events.

    events_index marks where the [Events] section sat among the sections so
    re-serialization keeps the original layout; unknown sections pass through
    verbatim.
    """

    sections: tuple  # ((header_line, (raw lines...)), ...)
    events: tuple  # Event values
    events_index: int

    def to_sparse_track(self, name: str = "events") -> SparseTrack:
        return SparseTrack(name=name, events=self.events)

    def serialize(self) -> str:
        lines = []
        for i, (header, raw) in enumerate(self.sections):
            if i == self.events_index:
                lines.append("[Events]")
                lines.append(EVENT_FORMAT_LINE)
                lines.extend(dialogue_line(e) for e in self.events)
                lines.append("")
            else:
                lines.append(header)
                lines.extend(raw)
        while lines and lines[-1] == "":
            lines.pop()
        return "\n".join(lines) + "\n"


def ssa_serialize(track: SparseTrack, script_info: dict | None = None) -> str:
    """Render a sparse track as a complete SSA document (deterministic)."""
    info = {"Title": track.name, "ScriptType": "v4.00+"}
    info.update(script_info or {})
    lines = ["[Script Info]"]
    lines += [f"{k}: {v}" for k, v in info.items()]
    lines.append("")
    lines += [STYLES_HEADER, STYLE_FORMAT_LINE, DEFAULT_STYLE_LINE, ""]
    lines += ["[Events]", EVENT_FORMAT_LINE]
    lines += [dialogue_line(e) for e in track.events]
    return "\n".join(lines) + "\n"


def codec_private_text(track: SparseTrack, script_info: dict | None = None) -> str:
    """Everything above the Dialogue lines, for the container's CodecPrivate."""
    doc = ssa_serialize(SparseTrack(name=track.name, events=()), script_info)
    return doc


def _parse_text_field(text: str):
    pos = None
    m = _POS_RE.match(text)
    if m:
        pos = (int(m.group(1)), int(m.group(2)))
        text = text[m.end():]
    return _unescape(text), pos


def ssa_parse(text: str) -> SsaDocument:
    """Parse an SSA/ASS document.

    Dialogue fields are read positionally per the Format header; unknown
    sections are preserved verbatim so re-serialization is faithful.
    """
    sections = []
    events = []
    events_index = None
    fields = None
    current = None  # (header, [lines])
    saw_events = False
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            if current is not None:
                sections.append((current[0], tuple(current[1])))
            if stripped.lower() == "[events]":
                saw_events = True
                events_index = len(sections)
                sections.append(("[Events]", ()))
                current = None
            else:
                current = (line, [])
            continue
        if current is not None:
            current[1].append(line)
            continue
        if not saw_events or events_index != len(sections) - 1:
            if stripped:
                raise SsaError("content before first section header", line=lineno)
            continue
        # inside [Events]
        if not stripped:
            continue
        key, _, rest = line.partition(":")
        key = key.strip().lower()
        if key == "format":
            fields = tuple(f.strip() for f in rest.split(","))
            for needed in ("Start", "End", "Text"):
                if needed not in fields:
                    raise SsaError(f"event Format line lacks {needed}", line=lineno)
        elif key == "dialogue":
            if fields is None:
                raise SsaError("Dialogue before Format line", line=lineno)
            parts = rest.lstrip().split(",", len(fields) - 1)
            if len(parts) != len(fields):
                raise SsaError(f"expected {len(fields)} fields, found {len(parts)}", line=lineno)
            row = dict(zip(fields, parts))
            try:
                start = parse_timestamp(row["Start"])
                end = parse_timestamp(row["End"])
            except ValueError as e:
                raise SsaError(str(e), line=lineno) from None
            if end < start:
                raise SsaError(f"event ends before it starts ({row['End']} < {row['Start']})",
                               line=lineno)
            payload, pos = _parse_text_field(row["Text"])
            events.append(Event(time_s=start, duration_s=end - start,
                                payload=payload, position=pos))
        # other verbs (Comment:, Picture:, ...) are dropped from Events
    if current is not None:
        sections.append((current[0], tuple(current[1])))
    if not saw_events:
        raise SsaError("document has no [Events] section")
    if fields is None:
        raise SsaError("missing Format line in [Events] section")
    return SsaDocument(sections=tuple(sections), events=tuple(events),
                       events_index=events_index)


def events_from_low_rate_stream(series: TimecodedSeries, formatter=None,
                                name: str | None = None,
                                max_duration_s=Fraction(10)) -> SparseTrack:
    """One event per row of a low-rate series (switches, RFID reads).

    Event duration is the gap to the next row, capped (default 10 s) so
    players do not render stale labels; the final row gets the cap.
    """
    if series.n_rows == 0:
        raise ValueError("series must be nonempty")
    cap = as_fraction(max_duration_s)
    if formatter is None:
        formatter = lambda row: ",".join(f"{v:g}" for v in row)
    events = []
    times = series.times_s
    for i in range(series.n_rows):
        t = Fraction(float(times[i]))
        if i + 1 < series.n_rows:
            dur = min(Fraction(float(times[i + 1])) - t, cap)
        else:
            dur = cap
        events.append(Event(time_s=t, duration_s=dur, payload=formatter(series.values[i])))
    return SparseTrack(name=name or series.name, events=tuple(events))


def block_text(event: Event, read_order: int) -> str:
    """Container block payload: the Dialogue fields minus the timestamps,
    prefixed with the read order."""
    text = _escape(event.payload)
    if event.position is not None:
        x, y = event.position
        text = f"{{\\pos({x},{y})}}{text}"
    return f"{read_order},0,Default,,0,0,0,,{text}"


def event_from_block(text: str, time_s: Fraction, duration_s: Fraction) -> Event:
    parts = text.split(",", 8)
    if len(parts) != 9:
        raise SsaError(f"malformed subtitle block payload {text!r}")
    payload, pos = _parse_text_field(parts[8])
    return Event(time_s=time_s, duration_s=duration_s, payload=payload, position=pos)
