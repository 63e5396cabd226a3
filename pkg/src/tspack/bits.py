"""Bit-level buffers built on numpy bit arrays (one uint8 per bit).

The codecs assemble whole frames as bit arrays and pack them to bytes once
per frame; decoders unpack a byte region once and index into it. This keeps
the per-call Python overhead away from the hot loops in _kernels.
"""

import numpy as np

from .errors import RiceDecodeError


def uint_to_bits(value: int, width: int) -> np.ndarray:
    """MSB-first bits of an unsigned value."""
    if value < 0 or (width < 64 and value >> width):
        raise ValueError(f"value {value} does not fit in {width} bits")
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((np.uint64(value) >> shifts) & np.uint64(1)).astype(np.uint8)


def bits_to_uint(bits: np.ndarray) -> int:
    v = 0
    for b in bits.tolist():
        v = (v << 1) | b
    return v


def uints_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """MSB-first bit matrix of many unsigned values, flattened."""
    v = values.astype(np.uint64, copy=False)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((v[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8).ravel()


def bits_to_uints(bits: np.ndarray, count: int, width: int) -> np.ndarray:
    """Inverse of uints_to_bits; returns int64 values."""
    m = bits[: count * width].astype(np.int64).reshape(count, width)
    weights = np.int64(1) << np.arange(width - 1, -1, -1, dtype=np.int64)
    return m @ weights


def twos_complement_encode(values: np.ndarray, width: int) -> np.ndarray:
    """Signed int64 values -> unsigned width-bit patterns."""
    mask = np.int64((1 << width) - 1) if width < 64 else np.int64(-1)
    return (values.astype(np.int64) & mask).astype(np.uint64)


def twos_complement_decode(patterns: np.ndarray, width: int) -> np.ndarray:
    u = patterns.astype(np.int64)
    sign = np.int64(1) << (width - 1)
    return (u ^ sign) - sign


class Bits:
    """An immutable bit string: packed bytes plus an exact bit length."""

    __slots__ = ("data", "nbits")

    def __init__(self, data: bytes, nbits: int):
        if nbits > len(data) * 8 or nbits < (len(data) - 1) * 8:
            raise ValueError("bit length inconsistent with byte length")
        self.data = bytes(data)
        self.nbits = nbits

    @classmethod
    def from_array(cls, bits: np.ndarray) -> "Bits":
        return cls(np.packbits(bits).tobytes(), int(bits.size))

    def to_array(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.data, dtype=np.uint8))[: self.nbits]

    def to01(self) -> str:
        return "".join("1" if b else "0" for b in self.to_array().tolist())

    def __len__(self):
        return self.nbits

    def __eq__(self, other):
        return isinstance(other, Bits) and self.nbits == other.nbits and self.data == other.data

    def __repr__(self):
        return f"Bits({self.to01()!r})" if self.nbits <= 64 else f"Bits(<{self.nbits} bits>)"


class BitWriter:
    """Accumulates bit chunks; pack() emits bytes zero-padded to a boundary."""

    def __init__(self):
        self._chunks = []
        self._nbits = 0

    @property
    def nbits(self) -> int:
        return self._nbits

    def write_bits(self, bits: np.ndarray):
        self._chunks.append(bits)
        self._nbits += bits.size

    def write_uint(self, value: int, width: int):
        self.write_bits(uint_to_bits(value, width))

    def write_signed(self, value: int, width: int):
        self.write_uint(int(value) & ((1 << width) - 1), width)

    def write_bytes(self, data: bytes):
        self.write_bits(np.unpackbits(np.frombuffer(data, dtype=np.uint8)))

    def pad_to_byte(self):
        rem = -self._nbits % 8
        if rem:
            self.write_bits(np.zeros(rem, np.uint8))

    def bit_array(self) -> np.ndarray:
        if not self._chunks:
            return np.zeros(0, np.uint8)
        return np.concatenate(self._chunks)

    def pack(self) -> bytes:
        return np.packbits(self.bit_array()).tobytes()


class BitReader:
    """Cursor over an unpacked bit array; raises RiceDecodeError past the end."""

    def __init__(self, bits: np.ndarray, pos: int = 0):
        self.bits = bits
        self.pos = pos

    @classmethod
    def from_bytes(cls, data: bytes, pos: int = 0) -> "BitReader":
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8)), pos)

    def _need(self, n: int):
        if self.pos + n > self.bits.size:
            raise RiceDecodeError(self.bits.size)

    def read_uint(self, width: int) -> int:
        self._need(width)
        v = bits_to_uint(self.bits[self.pos:self.pos + width])
        self.pos += width
        return v

    def read_signed(self, width: int) -> int:
        u = self.read_uint(width)
        return (u ^ (1 << (width - 1))) - (1 << (width - 1))

    def read_uints(self, count: int, width: int) -> np.ndarray:
        self._need(count * width)
        out = bits_to_uints(self.bits[self.pos:], count, width)
        self.pos += count * width
        return out

    def read_unary(self, terminator: int) -> int:
        rest = self.bits[self.pos:]
        hits = np.flatnonzero(rest == terminator)
        if hits.size == 0:
            raise RiceDecodeError(self.bits.size)
        q = int(hits[0])
        self.pos += q + 1
        return q

    def align_to_byte(self):
        self.pos += -self.pos % 8
