"""EBML primitives: variable-size integers, element framing, typed payloads.

Element IDs are handled as their raw byte patterns (marker bit included) so
they can be table-checked against the registry in mkv.py. Sizes use the
EBML variable-size encoding; the all-ones pattern is the unknown-size
marker, legal only on Segment during streaming reads.
"""

import struct

from .errors import EbmlError

VINT_MAX = (1 << 56) - 2
UNKNOWN_SIZE = None


def vint_width(value: int) -> int:
    """Minimal width in bytes: width w holds values up to 2**(7w) - 2."""
    if value < 0 or value > VINT_MAX:
        raise ValueError(f"vint value {value} out of range")
    w = 1
    while value > (1 << (7 * w)) - 2:
        w += 1
    return w


def vint_write(value: int, width: int | None = None) -> bytes:
    """EBML variable-size integer, minimal width unless one is forced."""
    w = vint_width(value) if width is None else width
    if not 1 <= w <= 8:
        raise ValueError("vint width must be 1..8")
    if value > (1 << (7 * w)) - 2:
        raise ValueError(f"value {value} does not fit in vint width {w}")
    out = value.to_bytes(w, "big")
    return bytes([out[0] | (0x80 >> (w - 1))]) + out[1:]


def vint_read(data, pos: int):
    """Returns (value, new_pos); value is UNKNOWN_SIZE for the reserved
    all-ones pattern. Raises EbmlError with the byte offset on truncation."""
    if pos >= len(data):
        raise EbmlError("truncated vint", offset=pos)
    b0 = data[pos]
    if b0 == 0:
        raise EbmlError("vint longer than 8 bytes", offset=pos)
    w = 9 - b0.bit_length()
    if pos + w > len(data):
        raise EbmlError("truncated vint", offset=len(data))
    value = b0 & (0xFF >> w)
    for i in range(1, w):
        value = (value << 8) | data[pos + i]
    if value == (1 << (7 * w)) - 1:
        return UNKNOWN_SIZE, pos + w
    return value, pos + w


def read_id(data, pos: int):
    """Element ID as its raw 1-4 byte pattern. Returns (id bytes, new_pos)."""
    if pos >= len(data):
        raise EbmlError("truncated element id", offset=pos)
    b0 = data[pos]
    if b0 & 0x80:
        w = 1
    elif b0 & 0x40:
        w = 2
    elif b0 & 0x20:
        w = 3
    elif b0 & 0x10:
        w = 4
    else:
        raise EbmlError(f"invalid element id byte {b0:#x}", offset=pos)
    if pos + w > len(data):
        raise EbmlError("truncated element id", offset=len(data))
    return bytes(data[pos:pos + w]), pos + w


def read_element_header(data, pos: int):
    """(id bytes, size or UNKNOWN_SIZE, payload_pos)."""
    eid, p = read_id(data, pos)
    size, p = vint_read(data, p)
    return eid, size, p


def iter_children(data, start: int, end: int, allow_unknown=False):
    """Yield (id, payload_start, payload_end) for elements in [start, end)."""
    pos = start
    while pos < end:
        eid, size, p = read_element_header(data, pos)
        if size is UNKNOWN_SIZE:
            if not allow_unknown:
                raise EbmlError("unknown-size element outside Segment context", offset=pos)
            size = end - p
        if p + size > end:
            raise EbmlError(f"element {eid.hex()} overruns its parent", offset=end)
        yield eid, p, p + size
        pos = p + size


# --- element builders ---------------------------------------------------------

def element(eid: bytes, payload: bytes) -> bytes:
    return eid + vint_write(len(payload)) + payload


def el_uint(eid: bytes, value: int) -> bytes:
    if value < 0:
        raise ValueError("unsigned element value must be >= 0")
    n = max(1, (value.bit_length() + 7) // 8)
    return element(eid, value.to_bytes(n, "big"))


def el_uint_fixed(eid: bytes, value: int, width: int = 8) -> bytes:
    """Fixed-width unsigned payload; used where sizes must not depend on the
    value (SeekPosition, CueClusterPosition) to keep layout deterministic."""
    return element(eid, value.to_bytes(width, "big"))


def el_sint(eid: bytes, value: int) -> bytes:
    n = 1
    while not -(1 << (8 * n - 1)) <= value < (1 << (8 * n - 1)):
        n += 1
    return element(eid, value.to_bytes(n, "big", signed=True))


def el_float(eid: bytes, value: float) -> bytes:
    return element(eid, struct.pack(">d", value))


def el_string(eid: bytes, value: str) -> bytes:
    return element(eid, value.encode("utf-8"))


# --- payload readers ----------------------------------------------------------

def as_uint(data, start: int, end: int) -> int:
    v = 0
    for i in range(start, end):
        v = (v << 8) | data[i]
    return v


def as_sint(data, start: int, end: int) -> int:
    if start == end:
        return 0
    return int.from_bytes(bytes(data[start:end]), "big", signed=True)


def as_float(data, start: int, end: int) -> float:
    n = end - start
    if n == 0:
        return 0.0
    if n == 4:
        return struct.unpack(">f", bytes(data[start:end]))[0]
    if n == 8:
        return struct.unpack(">d", bytes(data[start:end]))[0]
    raise EbmlError(f"float element of width {n}", offset=start)


def as_string(data, start: int, end: int) -> str:
    return bytes(data[start:end]).decode("utf-8", errors="replace")
