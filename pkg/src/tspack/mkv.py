"""Matroska muxing and demuxing.

Writer: two-pass, deterministic layout — EBML header, then a Segment holding
SeekHead, Info (TimestampScale 1 ms), Tracks, Tags, Clusters capped at 5 s,
and Cues indexing each cluster's first block per track. Audio frames ride in
SimpleBlocks (every frame is a keyframe); subtitle events use BlockGroup +
BlockDuration since they carry durations. SeekPosition/CueClusterPosition
payloads are fixed 8-byte integers so positions never shift while laying
out.

Reader: lazy. Opening parses the EBML header, the Segment envelope and the
small metadata elements; cluster payloads are only read when frames are
iterated, and seek_window jumps straight to the right cluster through Cues.
All reads go through a counting byte source, so seek cost is measurable.
Unknown elements are skipped by size; an element whose first child is CRC-32
is verified.
"""

import struct
import zlib
from dataclasses import dataclass, field
from fractions import Fraction

from . import ebml
from .ebml import UNKNOWN_SIZE
from .errors import MkvError, UsageError
from .model import Dataset, EncodedTrack, as_fraction

# Element IDs (raw patterns from the public registry)
EBML_ID = bytes.fromhex("1A45DFA3")
EBML_VERSION = bytes.fromhex("4286")
EBML_READ_VERSION = bytes.fromhex("42F7")
EBML_MAX_ID_LENGTH = bytes.fromhex("42F2")
EBML_MAX_SIZE_LENGTH = bytes.fromhex("42F3")
DOCTYPE = bytes.fromhex("4282")
DOCTYPE_VERSION = bytes.fromhex("4287")
DOCTYPE_READ_VERSION = bytes.fromhex("4285")
SEGMENT = bytes.fromhex("18538067")
SEEK_HEAD = bytes.fromhex("114D9B74")
SEEK = bytes.fromhex("4DBB")
SEEK_ID = bytes.fromhex("53AB")
SEEK_POSITION = bytes.fromhex("53AC")
INFO = bytes.fromhex("1549A966")
TIMESTAMP_SCALE = bytes.fromhex("2AD7B1")
DURATION = bytes.fromhex("4489")
MUXING_APP = bytes.fromhex("4D80")
WRITING_APP = bytes.fromhex("5741")
TRACKS = bytes.fromhex("1654AE6B")
TRACK_ENTRY = bytes.fromhex("AE")
TRACK_NUMBER = bytes.fromhex("D7")
TRACK_UID = bytes.fromhex("73C5")
TRACK_TYPE = bytes.fromhex("83")
FLAG_LACING = bytes.fromhex("9C")
LANGUAGE = bytes.fromhex("22B59C")
CODEC_ID = bytes.fromhex("86")
CODEC_PRIVATE = bytes.fromhex("63A2")
TRACK_NAME = bytes.fromhex("536E")
AUDIO = bytes.fromhex("E1")
SAMPLING_FREQUENCY = bytes.fromhex("B5")
CHANNELS = bytes.fromhex("9F")
BIT_DEPTH = bytes.fromhex("6264")
TAGS = bytes.fromhex("1254C367")
TAG = bytes.fromhex("7373")
TARGETS = bytes.fromhex("63C0")
TAG_TRACK_UID = bytes.fromhex("63C5")
SIMPLE_TAG = bytes.fromhex("67C8")
TAG_NAME = bytes.fromhex("45A3")
TAG_STRING = bytes.fromhex("4487")
CLUSTER = bytes.fromhex("1F43B675")
CLUSTER_TIMESTAMP = bytes.fromhex("E7")
SIMPLE_BLOCK = bytes.fromhex("A3")
BLOCK_GROUP = bytes.fromhex("A0")
BLOCK = bytes.fromhex("A1")
BLOCK_DURATION = bytes.fromhex("9B")
CUES = bytes.fromhex("1C53BB6B")
CUE_POINT = bytes.fromhex("BB")
CUE_TIME = bytes.fromhex("B3")
CUE_TRACK_POSITIONS = bytes.fromhex("B7")
CUE_TRACK = bytes.fromhex("F7")
CUE_CLUSTER_POSITION = bytes.fromhex("F1")
CRC32_ID = bytes.fromhex("BF")
VOID = bytes.fromhex("EC")

ID_NAMES = {
    EBML_ID: "EBML", EBML_VERSION: "EBMLVersion", EBML_READ_VERSION: "EBMLReadVersion",
    EBML_MAX_ID_LENGTH: "EBMLMaxIDLength", EBML_MAX_SIZE_LENGTH: "EBMLMaxSizeLength",
    DOCTYPE: "DocType", DOCTYPE_VERSION: "DocTypeVersion",
    DOCTYPE_READ_VERSION: "DocTypeReadVersion",
    SEGMENT: "Segment", SEEK_HEAD: "SeekHead", SEEK: "Seek", SEEK_ID: "SeekID",
    SEEK_POSITION: "SeekPosition", INFO: "Info", TIMESTAMP_SCALE: "TimestampScale",
    DURATION: "Duration", MUXING_APP: "MuxingApp", WRITING_APP: "WritingApp",
    TRACKS: "Tracks", TRACK_ENTRY: "TrackEntry", TRACK_NUMBER: "TrackNumber",
    TRACK_UID: "TrackUID", TRACK_TYPE: "TrackType", FLAG_LACING: "FlagLacing",
    LANGUAGE: "Language", CODEC_ID: "CodecID", CODEC_PRIVATE: "CodecPrivate",
    TRACK_NAME: "Name", AUDIO: "Audio", SAMPLING_FREQUENCY: "SamplingFrequency",
    CHANNELS: "Channels", BIT_DEPTH: "BitDepth", TAGS: "Tags", TAG: "Tag",
    TARGETS: "Targets", TAG_TRACK_UID: "TagTrackUID", SIMPLE_TAG: "SimpleTag",
    TAG_NAME: "TagName", TAG_STRING: "TagString", CLUSTER: "Cluster",
    CLUSTER_TIMESTAMP: "Timestamp", SIMPLE_BLOCK: "SimpleBlock",
    BLOCK_GROUP: "BlockGroup", BLOCK: "Block", BLOCK_DURATION: "BlockDuration",
    CUES: "Cues", CUE_POINT: "CuePoint", CUE_TIME: "CueTime",
    CUE_TRACK_POSITIONS: "CueTrackPositions", CUE_TRACK: "CueTrack",
    CUE_CLUSTER_POSITION: "CueClusterPosition", CRC32_ID: "CRC-32", VOID: "Void",
}

MASTER_IDS = {EBML_ID, SEGMENT, SEEK_HEAD, SEEK, INFO, TRACKS, TRACK_ENTRY, AUDIO,
              TAGS, TAG, TARGETS, SIMPLE_TAG, CLUSTER, BLOCK_GROUP, CUES, CUE_POINT,
              CUE_TRACK_POSITIONS}

TRACK_TYPE_AUDIO = 2
TRACK_TYPE_SUBTITLE = 17

# project tag names for stream metadata (documented in the README)
TAG_UNITS = "UNITS"
TAG_SI_FACTOR = "SI_FACTOR"
TAG_RANGE_MIN = "RANGE_MIN"
TAG_RANGE_MAX = "RANGE_MAX"
TAG_RATE_EXACT = "RATE_EXACT"
TAG_START_EXACT = "START_EXACT"
TAG_FORMAT = "SAMPLE_FORMAT"
TAG_EXTRA_PREFIX = "META_"

WRITING_APP_NAME = "tspack 0.1.0"
SUBTITLE_CODEC_ID = "S_TEXT/ASS"


@dataclass(frozen=True)
class MuxOptions:
    cluster_seconds: Fraction = Fraction(5)
    timestamp_scale_ns: int = 1_000_000
    writing_app: str = WRITING_APP_NAME

    def __post_init__(self):
        object.__setattr__(self, "cluster_seconds", as_fraction(self.cluster_seconds))
        if self.cluster_seconds <= 0:
            raise ValueError("cluster_seconds must be positive")
        if self.timestamp_scale_ns < 1:
            raise ValueError("timestamp_scale_ns must be >= 1")


@dataclass(frozen=True)
class TrackPlan:
    track_number: int
    track_type: int
    codec_id: str
    codec_private: bytes
    name: str
    language: str = "und"
    sampling_frequency: float | None = None
    channels: int | None = None
    bit_depth: int | None = None
    tags: tuple = ()  # (name, value) string pairs


def _ticks(t: Fraction, scale_ns: int) -> int:
    return round(t * Fraction(1_000_000_000, scale_ns))


def _rational_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _track_tags(et: EncodedTrack) -> tuple:
    tags = []
    if et.rate_hz is not None:
        tags.append((TAG_RATE_EXACT, _rational_str(et.rate_hz)))
    if et.start_time_s is not None:
        tags.append((TAG_START_EXACT, _rational_str(et.start_time_s)))
    if et.format is not None:
        tags.append((TAG_FORMAT, et.format.kind))
    m = et.meta
    if m is not None:
        if m.units:
            tags.append((TAG_UNITS, m.units))
        if m.si_conversion_factor is not None:
            tags.append((TAG_SI_FACTOR, _rational_str(m.si_conversion_factor)))
        if m.range_min is not None:
            tags.append((TAG_RANGE_MIN, _rational_str(m.range_min)))
        if m.range_max is not None:
            tags.append((TAG_RANGE_MAX, _rational_str(m.range_max)))
        for k, v in m.extra:
            tags.append((TAG_EXTRA_PREFIX + k, v))
    return tuple(tags)


def _plan_tracks(dataset: Dataset, encoded: list) -> list:
    by_name = {}
    for et in encoded:
        if et.name in by_name:
            raise UsageError(f"duplicate encoded track {et.name!r}")
        by_name[et.name] = et
    plans = []
    number = 0
    for s in dataset.streams:
        et = by_name.pop(s.name, None)
        if et is None or et.kind != "audio":
            raise UsageError(f"no encoded audio track for stream {s.name!r}")
        number += 1
        plans.append((TrackPlan(
            track_number=number, track_type=TRACK_TYPE_AUDIO, codec_id=et.codec_id,
            codec_private=et.codec_private, name=et.name,
            sampling_frequency=float(et.rate_hz), channels=et.channels,
            bit_depth=et.format.bits_per_sample if et.format else None,
            tags=_track_tags(et)), et))
    for t in dataset.tracks:
        et = by_name.pop(t.name, None)
        if et is None or et.kind != "subtitle":
            raise UsageError(f"no encoded subtitle track for {t.name!r}")
        number += 1
        plans.append((TrackPlan(
            track_number=number, track_type=TRACK_TYPE_SUBTITLE, codec_id=et.codec_id,
            codec_private=et.codec_private, name=et.name, tags=_track_tags(et)), et))
    if by_name:
        raise UsageError(f"encoded tracks without dataset entries: {sorted(by_name)}")
    return plans


def _ebml_header() -> bytes:
    payload = (ebml.el_uint(EBML_VERSION, 1)
               + ebml.el_uint(EBML_READ_VERSION, 1)
               + ebml.el_uint(EBML_MAX_ID_LENGTH, 4)
               + ebml.el_uint(EBML_MAX_SIZE_LENGTH, 8)
               + ebml.el_string(DOCTYPE, "matroska")
               + ebml.el_uint(DOCTYPE_VERSION, 4)
               + ebml.el_uint(DOCTYPE_READ_VERSION, 2))
    return ebml.element(EBML_ID, payload)


def _info_element(opts: MuxOptions, duration_ticks: float) -> bytes:
    payload = (ebml.el_uint(TIMESTAMP_SCALE, opts.timestamp_scale_ns)
               + ebml.el_float(DURATION, float(duration_ticks))
               + ebml.el_string(MUXING_APP, opts.writing_app)
               + ebml.el_string(WRITING_APP, opts.writing_app))
    return ebml.element(INFO, payload)


def _tracks_element(plans: list) -> bytes:
    entries = b""
    for plan, _et in plans:
        body = (ebml.el_uint(TRACK_NUMBER, plan.track_number)
                + ebml.el_uint(TRACK_UID, plan.track_number)
                + ebml.el_uint(TRACK_TYPE, plan.track_type)
                + ebml.el_uint(FLAG_LACING, 0)
                + ebml.el_string(LANGUAGE, plan.language)
                + ebml.el_string(TRACK_NAME, plan.name)
                + ebml.el_string(CODEC_ID, plan.codec_id))
        if plan.codec_private:
            body += ebml.element(CODEC_PRIVATE, plan.codec_private)
        if plan.track_type == TRACK_TYPE_AUDIO:
            audio = ebml.el_float(SAMPLING_FREQUENCY, plan.sampling_frequency or 0.0)
            if plan.channels:
                audio += ebml.el_uint(CHANNELS, plan.channels)
            if plan.bit_depth:
                audio += ebml.el_uint(BIT_DEPTH, plan.bit_depth)
            body += ebml.element(AUDIO, audio)
        entries += ebml.element(TRACK_ENTRY, body)
    return ebml.element(TRACKS, entries)


def _simple_tags(pairs) -> bytes:
    out = b""
    for k, v in pairs:
        out += ebml.element(SIMPLE_TAG, ebml.el_string(TAG_NAME, k) + ebml.el_string(TAG_STRING, v))
    return out


def _tags_element(dataset: Dataset, plans: list) -> bytes:
    tags = b""
    if dataset.session_meta:
        tags += ebml.element(TAG, ebml.element(TARGETS, b"") + _simple_tags(dataset.session_meta))
    for plan, _et in plans:
        if plan.tags:
            targets = ebml.element(TARGETS, ebml.el_uint(TAG_TRACK_UID, plan.track_number))
            tags += ebml.element(TAG, targets + _simple_tags(plan.tags))
    return ebml.element(TAGS, tags) if tags else b""


def _simple_block(track: int, rel: int, payload: bytes, keyframe: bool) -> bytes:
    flags = 0x80 if keyframe else 0x00
    body = ebml.vint_write(track) + struct.pack(">h", rel) + bytes([flags]) + payload
    return ebml.element(SIMPLE_BLOCK, body)


def _block_group(track: int, rel: int, payload: bytes, duration_ticks: int) -> bytes:
    body = ebml.vint_write(track) + struct.pack(">h", rel) + bytes([0]) + payload
    return ebml.element(BLOCK_GROUP,
                        ebml.element(BLOCK, body) + ebml.el_uint(BLOCK_DURATION, duration_ticks))


def mux(dataset: Dataset, encoded: list, options: MuxOptions | None = None) -> bytes:
    """Serialize one dataset (with its encoded tracks, matched by name) into
    a standalone .mkv byte string."""
    opts = options or MuxOptions()
    plans = _plan_tracks(dataset, encoded)
    scale = opts.timestamp_scale_ns

    # collect blocks on the session clock
    blocks = []  # (ticks, seq, plan, duration_ticks | None, payload)
    seq = 0
    duration_end = Fraction(0)
    for plan, et in plans:
        for f in et.frames:
            t = _ticks(f.time_s, scale)
            dur = None
            if plan.track_type == TRACK_TYPE_SUBTITLE:
                dur = _ticks(f.duration_s or Fraction(0), scale)
            blocks.append((t, seq, plan, dur, f.payload))
            seq += 1
            end = f.time_s + (f.duration_s or 0)
            duration_end = max(duration_end, end)
    blocks.sort(key=lambda b: (b[0], b[2].track_number, b[1]))

    # group into clusters spanning at most cluster_seconds
    span = _ticks(opts.cluster_seconds, scale)
    clusters = []  # (base_ticks, [(plan, rel, dur, payload)])
    for t, _seq, plan, dur, payload in blocks:
        if not clusters or t - clusters[-1][0] >= span:
            clusters.append((t, []))
        base = clusters[-1][0]
        rel = t - base
        if rel > 0x7FFF:
            raise MkvError("block timestamp exceeds the cluster-relative range")
        clusters[-1][1].append((plan, rel, dur, payload))

    cluster_bytes = []
    for base, members in clusters:
        body = ebml.el_uint(CLUSTER_TIMESTAMP, base)
        for plan, rel, dur, payload in members:
            if plan.track_type == TRACK_TYPE_AUDIO:
                body += _simple_block(plan.track_number, rel, payload, True)
            else:
                body += _block_group(plan.track_number, rel, payload, dur or 0)
        cluster_bytes.append(ebml.element(CLUSTER, body))

    info_el = _info_element(opts, float(_ticks(duration_end, scale)))
    tracks_el = _tracks_element(plans)
    tags_el = _tags_element(dataset, plans)
    have_cues = bool(clusters)

    # SeekHead first; every Seek entry has a fixed 21-byte size
    entry_targets = [(INFO, None), (TRACKS, None)]
    if tags_el:
        entry_targets.append((TAGS, None))
    if have_cues:
        entry_targets.append((CUES, None))
    seekhead_size = 4 + 1 + 21 * len(entry_targets)

    info_pos = seekhead_size
    tracks_pos = info_pos + len(info_el)
    tags_pos = tracks_pos + len(tracks_el)
    clusters_pos = tags_pos + len(tags_el)
    positions = {INFO: info_pos, TRACKS: tracks_pos, TAGS: tags_pos}

    cluster_positions = []
    p = clusters_pos
    for cb in cluster_bytes:
        cluster_positions.append(p)
        p += len(cb)
    cues_pos = p
    positions[CUES] = cues_pos

    cues_el = b""
    if have_cues:
        cues_body = b""
        for (base, members), cpos in zip(clusters, cluster_positions):
            tracks_here = sorted({plan.track_number for plan, _r, _d, _p in members})
            ctp = b"".join(
                ebml.element(CUE_TRACK_POSITIONS,
                             ebml.el_uint(CUE_TRACK, tn)
                             + ebml.el_uint_fixed(CUE_CLUSTER_POSITION, cpos, 8))
                for tn in tracks_here)
            cues_body += ebml.element(CUE_POINT, ebml.el_uint(CUE_TIME, base) + ctp)
        cues_el = ebml.element(CUES, cues_body)

    seeks = b""
    for target, _ in entry_targets:
        seeks += ebml.element(SEEK, ebml.element(SEEK_ID, target)
                              + ebml.el_uint_fixed(SEEK_POSITION, positions[target], 8))
    seekhead = ebml.element(SEEK_HEAD, seeks)
    if len(seekhead) != seekhead_size:
        raise MkvError("seek head layout drifted")  # internal invariant

    segment_payload = seekhead + info_el + tracks_el + tags_el + b"".join(cluster_bytes) + cues_el
    return _ebml_header() + ebml.element(SEGMENT, segment_payload)


# --- demuxing -----------------------------------------------------------------

class ByteSource:
    """Bounds-checked byte reader that counts every byte served."""

    def __init__(self, data: bytes):
        self._data = bytes(data)
        self.bytes_read = 0

    def __len__(self):
        return len(self._data)

    def read(self, offset: int, n: int) -> bytes:
        if offset < 0 or n < 0 or offset + n > len(self._data):
            raise MkvError("container truncated", offset=min(len(self._data), max(offset, 0) + max(n, 0)))
        self.bytes_read += n
        return self._data[offset:offset + n]


@dataclass
class MkvTrack:
    number: int
    track_type: int
    codec_id: str
    codec_private: bytes = b""
    name: str = ""
    language: str = ""
    uid: int = 0
    sampling_frequency: float | None = None
    channels: int | None = None
    bit_depth: int | None = None
    tags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MkvFrame:
    track_number: int
    time_ticks: int
    payload: bytes
    duration_ticks: int | None = None
    keyframe: bool = True

    def time_s(self, scale_ns: int = 1_000_000) -> Fraction:
        return Fraction(self.time_ticks * scale_ns, 1_000_000_000)

    def duration_s(self, scale_ns: int = 1_000_000) -> Fraction | None:
        if self.duration_ticks is None:
            return None
        return Fraction(self.duration_ticks * scale_ns, 1_000_000_000)


@dataclass(frozen=True)
class SeekResult:
    frames: tuple
    used_cues: bool


def _verify_crc32(payload: bytes, abs_start: int):
    """If the first child is CRC-32, verify it over the rest of the payload.
    Returns the offset of the real content within payload."""
    if not payload[:1] or payload[0] != CRC32_ID[0]:
        return 0
    try:
        eid, size, p = ebml.read_element_header(payload, 0)
    except ebml.EbmlError:
        return 0
    if eid != CRC32_ID or size is UNKNOWN_SIZE:
        return 0
    stated = int.from_bytes(payload[p:p + size], "little")
    actual = zlib.crc32(payload[p + size:]) & 0xFFFFFFFF
    if stated != actual:
        raise MkvError("CRC-32 mismatch", offset=abs_start)
    return p + size


def _children(payload: bytes, start: int, end: int, abs_base: int):
    """iter_children with errors re-raised at absolute file offsets."""
    try:
        yield from ebml.iter_children(payload, start, end)
    except ebml.EbmlError as e:
        raise MkvError("malformed element content", offset=abs_base + (e.offset or 0)) from None


class MkvFile:
    """Lazily demuxed container. Construction reads headers and metadata;
    frames() and seek_window() read clusters on demand."""

    def __init__(self, data: bytes):
        self.src = ByteSource(data)
        self.timestamp_scale_ns = 1_000_000
        self.duration_ticks = None
        self.muxing_app = ""
        self.writing_app = ""
        self.doc_type = ""
        self.tracks = []
        self.session_tags = {}
        self._tags_by_uid = {}
        self._cluster_offsets = []  # absolute offsets of cluster elements
        self._cues = None  # [(time_ticks, track, abs_cluster_offset)]
        self._segment_start = 0
        self._segment_end = 0
        self._parse_envelope()

    # -- envelope and metadata

    def _read_header_at(self, pos: int, end: int):
        chunk = self.src.read(pos, min(12, end - pos))
        try:
            eid, size, p = ebml.read_element_header(chunk, 0)
        except ebml.EbmlError as e:
            raise MkvError(str(e.args[0]) if e.args else "bad element header",
                           offset=pos + (e.offset or 0)) from None
        return eid, size, pos + p

    def _parse_envelope(self):
        total = len(self.src)
        eid, size, payload_pos = self._read_header_at(0, total)
        if eid != EBML_ID or size is UNKNOWN_SIZE:
            raise MkvError("not an EBML document", offset=0)
        header = self.src.read(payload_pos, size)
        for hid, s, e in ebml.iter_children(header, 0, len(header)):
            if hid == DOCTYPE:
                self.doc_type = ebml.as_string(header, s, e)
        if self.doc_type not in ("matroska", "webm"):
            raise MkvError(f"unsupported DocType {self.doc_type!r}", offset=0)

        pos = payload_pos + size
        eid, size, payload_pos = self._read_header_at(pos, total)
        if eid != SEGMENT:
            raise MkvError("expected Segment element", offset=pos)
        if size is UNKNOWN_SIZE:
            seg_end = total
        else:
            seg_end = payload_pos + size
            if seg_end > total:
                raise MkvError("Segment size exceeds the file", offset=total)
        self._segment_start = payload_pos
        self._segment_end = seg_end

        # linear top-level header scan; payloads are skipped by size
        cursor = payload_pos
        while cursor < seg_end:
            eid, size, p = self._read_header_at(cursor, seg_end)
            if size is UNKNOWN_SIZE:
                raise MkvError("unknown-size element inside Segment", offset=cursor)
            if p + size > seg_end:
                raise MkvError(f"element {eid.hex()} overruns the Segment", offset=seg_end)
            if eid == INFO:
                self._parse_info(self.src.read(p, size), p)
            elif eid == TRACKS:
                self._parse_tracks(self.src.read(p, size), p)
            elif eid == TAGS:
                self._parse_tags(self.src.read(p, size), p)
            elif eid == CLUSTER:
                self._cluster_offsets.append(cursor)
            elif eid == CUES:
                self._cues_range = (p, size)
            cursor = p + size
        self._attach_tags()

    def _parse_info(self, payload: bytes, abs_start: int):
        off = _verify_crc32(payload, abs_start)
        for eid, s, e in _children(payload, off, len(payload), abs_start):
            if eid == TIMESTAMP_SCALE:
                self.timestamp_scale_ns = ebml.as_uint(payload, s, e)
            elif eid == DURATION:
                self.duration_ticks = ebml.as_float(payload, s, e)
            elif eid == MUXING_APP:
                self.muxing_app = ebml.as_string(payload, s, e)
            elif eid == WRITING_APP:
                self.writing_app = ebml.as_string(payload, s, e)

    def _parse_tracks(self, payload: bytes, abs_start: int):
        off = _verify_crc32(payload, abs_start)
        for eid, s, e in _children(payload, off, len(payload), abs_start):
            if eid != TRACK_ENTRY:
                continue
            tr = MkvTrack(number=0, track_type=0, codec_id="")
            for cid, cs, ce in _children(payload, s, e, abs_start):
                if cid == TRACK_NUMBER:
                    tr.number = ebml.as_uint(payload, cs, ce)
                elif cid == TRACK_UID:
                    tr.uid = ebml.as_uint(payload, cs, ce)
                elif cid == TRACK_TYPE:
                    tr.track_type = ebml.as_uint(payload, cs, ce)
                elif cid == CODEC_ID:
                    tr.codec_id = ebml.as_string(payload, cs, ce)
                elif cid == CODEC_PRIVATE:
                    tr.codec_private = bytes(payload[cs:ce])
                elif cid == TRACK_NAME:
                    tr.name = ebml.as_string(payload, cs, ce)
                elif cid == LANGUAGE:
                    tr.language = ebml.as_string(payload, cs, ce)
                elif cid == AUDIO:
                    for aid, as_, ae in _children(payload, cs, ce, abs_start):
                        if aid == SAMPLING_FREQUENCY:
                            tr.sampling_frequency = ebml.as_float(payload, as_, ae)
                        elif aid == CHANNELS:
                            tr.channels = ebml.as_uint(payload, as_, ae)
                        elif aid == BIT_DEPTH:
                            tr.bit_depth = ebml.as_uint(payload, as_, ae)
            self.tracks.append(tr)

    def _parse_tags(self, payload: bytes, abs_start: int):
        off = _verify_crc32(payload, abs_start)
        for eid, s, e in _children(payload, off, len(payload), abs_start):
            if eid != TAG:
                continue
            uid = 0
            pairs = {}
            for cid, cs, ce in _children(payload, s, e, abs_start):
                if cid == TARGETS:
                    for tid, ts, te in _children(payload, cs, ce, abs_start):
                        if tid == TAG_TRACK_UID:
                            uid = ebml.as_uint(payload, ts, te)
                elif cid == SIMPLE_TAG:
                    name = value = None
                    for nid, ns, ne in _children(payload, cs, ce, abs_start):
                        if nid == TAG_NAME:
                            name = ebml.as_string(payload, ns, ne)
                        elif nid == TAG_STRING:
                            value = ebml.as_string(payload, ns, ne)
                    if name is not None:
                        pairs[name] = value or ""
            if uid == 0:
                self.session_tags.update(pairs)
            else:
                self._tags_by_uid.setdefault(uid, {}).update(pairs)

    def _attach_tags(self):
        for tr in self.tracks:
            tr.tags = self._tags_by_uid.get(tr.uid or tr.number, {})

    # -- frames

    @property
    def bytes_read(self) -> int:
        return self.src.bytes_read

    def track_by_name(self, name: str) -> MkvTrack | None:
        for tr in self.tracks:
            if tr.name == name:
                return tr
        return None

    def _parse_cluster(self, offset: int):
        """Read one cluster; returns (cluster_ticks, [MkvFrame...])."""
        eid, size, p = self._read_header_at(offset, self._segment_end)
        if eid != CLUSTER:
            raise MkvError("not a cluster", offset=offset)
        payload = self.src.read(p, size)
        off = _verify_crc32(payload, offset)
        ts = 0
        frames = []
        for cid, s, e in _children(payload, off, len(payload), p):
            if cid == CLUSTER_TIMESTAMP:
                ts = ebml.as_uint(payload, s, e)
            elif cid == SIMPLE_BLOCK:
                frames.append(self._parse_block(payload, s, e, ts, None, p + s))
            elif cid == BLOCK_GROUP:
                block_span = None
                dur = None
                for gid, gs, ge in _children(payload, s, e, p):
                    if gid == BLOCK:
                        block_span = (gs, ge)
                    elif gid == BLOCK_DURATION:
                        dur = ebml.as_uint(payload, gs, ge)
                if block_span is not None:
                    frames.append(self._parse_block(payload, block_span[0], block_span[1],
                                                    ts, dur if dur is not None else 0, p + s))
        return ts, frames

    def _parse_block(self, payload: bytes, s: int, e: int, cluster_ts: int,
                     duration: int | None, abs_pos: int) -> MkvFrame:
        try:
            track, p = ebml.vint_read(payload, s)
        except ebml.EbmlError as err:
            raise MkvError("bad block track number", offset=abs_pos) from err
        if track is UNKNOWN_SIZE or p + 3 > e:
            raise MkvError("truncated block header", offset=abs_pos)
        rel = struct.unpack(">h", payload[p:p + 2])[0]
        flags = payload[p + 2]
        if flags & 0x06:
            raise MkvError("laced blocks are not supported", offset=abs_pos)
        keyframe = bool(flags & 0x80)
        return MkvFrame(track_number=track, time_ticks=cluster_ts + rel,
                        payload=bytes(payload[p + 3:e]),
                        duration_ticks=duration, keyframe=keyframe)

    def frames(self, track_number: int | None = None):
        """Iterate frames in storage order, optionally for one track."""
        for offset in self._cluster_offsets:
            _ts, frames = self._parse_cluster(offset)
            for f in frames:
                if track_number is None or f.track_number == track_number:
                    yield f

    # -- seeking

    def cues(self) -> list:
        if self._cues is None:
            self._cues = []
            rng = getattr(self, "_cues_range", None)
            if rng is not None:
                p, size = rng
                payload = self.src.read(p, size)
                off = _verify_crc32(payload, p)
                for eid, s, e in _children(payload, off, len(payload), p):
                    if eid != CUE_POINT:
                        continue
                    time_ticks = None
                    for cid, cs, ce in _children(payload, s, e, p):
                        if cid == CUE_TIME:
                            time_ticks = ebml.as_uint(payload, cs, ce)
                        elif cid == CUE_TRACK_POSITIONS:
                            track = cpos = None
                            for pid, ps, pe in _children(payload, cs, ce, p):
                                if pid == CUE_TRACK:
                                    track = ebml.as_uint(payload, ps, pe)
                                elif pid == CUE_CLUSTER_POSITION:
                                    cpos = ebml.as_uint(payload, ps, pe)
                            if time_ticks is not None and track is not None and cpos is not None:
                                self._cues.append((time_ticks, track, self._segment_start + cpos))
        return self._cues

    def _peek_cluster_ts(self, offset: int) -> int | None:
        """Cluster timestamp from a small prefix read, or None if the first
        child is not a Timestamp element."""
        try:
            eid, size, p = self._read_header_at(offset, self._segment_end)
            if eid != CLUSTER:
                return None
            chunk = self.src.read(p, min(16, size))
            cid, csize, cp = ebml.read_element_header(chunk, 0)
            if cid != CLUSTER_TIMESTAMP or csize is UNKNOWN_SIZE or cp + csize > len(chunk):
                return None
            return ebml.as_uint(chunk, cp, cp + csize)
        except (MkvError, ebml.EbmlError):
            return None

    def seek_window(self, track_number: int, t_start_s, t_end_s) -> SeekResult:
        """Frames of one track overlapping [t_start, t_end], located through
        Cues when present (falling back to a linear scan with a flag)."""
        scale = self.timestamp_scale_ns
        t0 = as_fraction(t_start_s)
        t1 = as_fraction(t_end_s)
        tick0 = (t0 * Fraction(1_000_000_000, scale)).__floor__()
        tick1 = -((-t1 * Fraction(1_000_000_000, scale)).__floor__())  # ceil

        cues = [c for c in self.cues() if c[1] == track_number]
        used_cues = bool(cues)
        if used_cues:
            candidates = [off for t, _tr, off in cues if t <= tick0]
            start_offset = max(candidates) if candidates else min(off for _t, _tr, off in cues)
            offsets = [off for off in self._cluster_offsets if off >= start_offset]
        else:
            offsets = list(self._cluster_offsets)
        cue_ts = {off: t for t, _tr, off in self.cues()}

        out = []
        for off in offsets:
            known = cue_ts.get(off)
            if known is None:
                known = self._peek_cluster_ts(off)
            if known is not None and known > tick1:
                break
            ts, frames = self._parse_cluster(off)
            if known is None and ts > tick1:
                break
            for f in frames:
                if f.track_number != track_number or f.time_ticks > tick1:
                    continue
                if f.duration_ticks is not None and f.time_ticks + f.duration_ticks < tick0:
                    continue
                out.append(f)
        return SeekResult(frames=tuple(out), used_cues=used_cues)


def demux(data: bytes) -> MkvFile:
    return MkvFile(data)
