"""Hot numeric kernels: Rice coding, polynomial predictors, CRCs.

Every kernel has two implementations: a numba-jitted loop and a pure-numpy
vectorized fallback. The jitted path is used when numba imports cleanly;
set TSC_NUMBA=0 to force the numpy path (numba is then not imported at
all). `implementations()` exposes both for the kernel benchmark.

Conventions shared by all Rice kernels:
  - values are zigzag-mapped unsigned ints carried in int64 arrays
  - a codeword is `q` filler bits, one terminator bit, then the k low bits
    of the value, MSB first
  - term_one=True  -> zero filler, terminator 1 (FLAC residual coding)
  - term_one=False -> one filler, terminator 0
Bit arrays are numpy uint8 with one element per bit.
"""

import os

import numpy as np

from .errors import RiceDecodeError


def _numba_requested() -> bool:
    return os.environ.get("TSC_NUMBA", "").strip().lower() not in ("0", "false", "no", "off")


HAVE_NUMBA = False
if _numba_requested():
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def zigzag(values: np.ndarray) -> np.ndarray:
    """Map signed to unsigned: 0,-1,1,-2,2.. -> 0,1,2,3,4.. (in int64)."""
    v = values.astype(np.int64, copy=False)
    return (v << 1) ^ (v >> 63)


def unzigzag(u: np.ndarray) -> np.ndarray:
    u = u.astype(np.int64, copy=False)
    return (u >> 1) ^ -(u & 1)


# ---------------------------------------------------------------------------
# Rice codeword cost, all k in 0..30 at once

def _rice_cost_all_np(u):
    out = np.empty(31, np.int64)
    n = u.size
    for k in range(31):
        out[k] = int((u >> k).sum()) + n * (k + 1)
    return out


def _rice_cost_all_loop(u):
    out = np.zeros(31, np.int64)
    for i in range(u.size):
        x = u[i]
        k = 0
        while k < 31:
            out[k] += x
            x >>= 1
            k += 1
            if x == 0:
                break
    n = u.size
    for k in range(31):
        out[k] += n * (k + 1)
    return out


# ---------------------------------------------------------------------------
# Rice encode to a bit array

def _rice_encode_bits_np(u, k, term_one):
    n = u.size
    q = u >> k
    lengths = q + 1 + k
    total = int(lengths.sum())
    bits = np.zeros(total, np.uint8)
    if n == 0:
        return bits
    starts = np.zeros(n, np.int64)
    np.cumsum(lengths[:-1], out=starts[1:])
    term_pos = starts + q
    if term_one:
        bits[term_pos] = 1
    else:
        # mark unary runs [start, start+q) with ones via coverage counting
        cover = np.zeros(total + 1, np.int64)
        np.add.at(cover, starts, 1)
        np.add.at(cover, term_pos, -1)
        bits[np.cumsum(cover[:-1]) > 0] = 1
    for j in range(k):
        bits[term_pos + 1 + j] = ((u >> (k - 1 - j)) & 1).astype(np.uint8)
    return bits


def _rice_encode_bits_loop(u, k, term_one):
    total = 0
    for i in range(u.size):
        total += (u[i] >> k) + 1 + k
    bits = np.zeros(total, np.uint8)
    term = np.uint8(1) if term_one else np.uint8(0)
    fill = np.uint8(0) if term_one else np.uint8(1)
    pos = 0
    for i in range(u.size):
        q = u[i] >> k
        for _ in range(q):
            bits[pos] = fill
            pos += 1
        bits[pos] = term
        pos += 1
        for j in range(k - 1, -1, -1):
            bits[pos] = (u[i] >> j) & 1
            pos += 1
    return bits


# ---------------------------------------------------------------------------
# Rice decode from a bit array
#
# Both implementations return (values, end_pos); a negative end_pos encodes
# truncation at bit -(end_pos + 1). The wrapper turns that into an exception.

def _rice_decode_bits_np(bits, pos, count, k, term_one):
    out = np.empty(count, np.int64)
    if count == 0:
        return out, pos
    n = bits.size
    term = 1 if term_one else 0
    cand = (np.flatnonzero(bits[pos:] == term) + pos).tolist()
    term_pos = np.empty(count, np.int64)
    ci = 0
    m = len(cand)
    p = pos
    for i in range(count):
        while ci < m and cand[ci] < p:
            ci += 1
        if ci >= m:
            return out, -n - 1
        t = cand[ci]
        term_pos[i] = t
        p = t + 1 + k
        ci += 1
    if p > n:
        return out, -n - 1
    starts = np.empty(count, np.int64)
    starts[0] = pos
    starts[1:] = term_pos[:-1] + 1 + k
    u = (term_pos - starts) << k
    if k:
        rem_idx = term_pos[:, None] + 1 + np.arange(k)[None, :]
        weights = np.int64(1) << np.arange(k - 1, -1, -1, dtype=np.int64)
        u |= bits[rem_idx].astype(np.int64) @ weights
    out[:] = u
    return out, int(p)


def _rice_decode_bits_loop(bits, pos, count, k, term_one):
    out = np.empty(count, np.int64)
    n = bits.size
    term = np.uint8(1) if term_one else np.uint8(0)
    for i in range(count):
        q = 0
        while pos < n and bits[pos] != term:
            q += 1
            pos += 1
        if pos >= n or pos + 1 + k > n:
            return out, -n - 1
        pos += 1
        r = 0
        for _ in range(k):
            r = (r << 1) | bits[pos]
            pos += 1
        out[i] = (q << k) | r
    return out, pos


# ---------------------------------------------------------------------------
# Fixed polynomial predictors: residuals are iterated first differences

def _fixed_diff_np(x, order):
    r = x.astype(np.int64, copy=True)
    for _ in range(order):
        r = r[1:] - r[:-1]
    return r


def _fixed_diff_loop(x, order):
    r = x.astype(np.int64)
    n = r.size
    for _ in range(order):
        for i in range(n - 1):
            r[i] = r[i + 1] - r[i]
        n -= 1
    return r[:n].copy()


def _fixed_undiff_np(warm, res, order):
    cur = res.astype(np.int64, copy=True)
    for level in range(order, 0, -1):
        c = warm.astype(np.int64, copy=True)
        for _ in range(level - 1):
            c = c[1:] - c[:-1]
        cur = c[-1] + np.cumsum(cur)
    return np.concatenate((warm.astype(np.int64), cur))


def _fixed_undiff_loop(warm, res, order):
    n = warm.size + res.size
    out = np.empty(n, np.int64)
    for i in range(warm.size):
        out[i] = warm[i]
    if order == 0:
        for i in range(res.size):
            out[warm.size + i] = res[i]
        return out
    state = np.zeros(order, np.int64)
    tmp = warm.astype(np.int64)
    state[0] = tmp[tmp.size - 1]
    m = tmp.size
    for level in range(1, order):
        for i in range(m - 1):
            tmp[i] = tmp[i + 1] - tmp[i]
        m -= 1
        state[level] = tmp[m - 1]
    for i in range(res.size):
        acc = res[i]
        for level in range(order - 1, -1, -1):
            acc = state[level] + acc
            state[level] = acc
        out[order + i] = acc
    return out


# ---------------------------------------------------------------------------
# CRCs over byte arrays (FLAC frame checksums)

def _make_crc8_table(poly=0x07):
    table = np.empty(256, np.int64)
    for i in range(256):
        c = i
        for _ in range(8):
            c = ((c << 1) ^ poly) & 0xFF if c & 0x80 else (c << 1) & 0xFF
        table[i] = c
    return table


def _make_crc16_table(poly=0x8005):
    table = np.empty(256, np.int64)
    for i in range(256):
        c = i << 8
        for _ in range(8):
            c = ((c << 1) ^ poly) & 0xFFFF if c & 0x8000 else (c << 1) & 0xFFFF
        table[i] = c
    return table


CRC8_TABLE = _make_crc8_table()
CRC16_TABLE = _make_crc16_table()
CRC8_TABLE.flags.writeable = False
CRC16_TABLE.flags.writeable = False


def _crc8_np(data, table, crc):
    t = table.tolist()
    c = int(crc)
    for b in data.tobytes():
        c = t[c ^ b]
    return c


def _crc8_loop(data, table, crc):
    c = crc
    for i in range(data.size):
        c = table[(c ^ data[i]) & 0xFF]
    return c


def _crc16_np(data, table, crc):
    t = table.tolist()
    c = int(crc)
    for b in data.tobytes():
        c = ((c << 8) & 0xFFFF) ^ t[((c >> 8) ^ b) & 0xFF]
    return c


def _crc16_loop(data, table, crc):
    c = crc
    for i in range(data.size):
        c = ((c << 8) & 0xFFFF) ^ table[((c >> 8) ^ data[i]) & 0xFF]
    return c


# ---------------------------------------------------------------------------
# Selection

_PAIRS = {
    "rice_cost_all": (_rice_cost_all_np, _rice_cost_all_loop),
    "rice_encode_bits": (_rice_encode_bits_np, _rice_encode_bits_loop),
    "rice_decode_bits": (_rice_decode_bits_np, _rice_decode_bits_loop),
    "fixed_diff": (_fixed_diff_np, _fixed_diff_loop),
    "fixed_undiff": (_fixed_undiff_np, _fixed_undiff_loop),
    "crc8": (_crc8_np, _crc8_loop),
    "crc16": (_crc16_np, _crc16_loop),
}

_JITTED = {}
if USE_NUMBA:
    for _name, (_np_impl, _loop_impl) in _PAIRS.items():
        _JITTED[_name] = njit(cache=True, nogil=True)(_loop_impl)


def _select(name):
    if USE_NUMBA:
        return _JITTED[name]
    return _PAIRS[name][0]


_rice_cost_all = _select("rice_cost_all")
_rice_encode_bits = _select("rice_encode_bits")
_rice_decode_bits = _select("rice_decode_bits")
_fixed_diff = _select("fixed_diff")
_fixed_undiff = _select("fixed_undiff")
_crc8 = _select("crc8")
_crc16 = _select("crc16")


def rice_cost_all(u: np.ndarray) -> np.ndarray:
    """Exact encoded bit length for every k in 0..30 of the zigzagged block."""
    return np.asarray(_rice_cost_all(np.ascontiguousarray(u, dtype=np.int64)))


def rice_encode_bits(u: np.ndarray, k: int, term_one: bool) -> np.ndarray:
    return _rice_encode_bits(np.ascontiguousarray(u, dtype=np.int64), k, term_one)


def rice_decode_bits(bits: np.ndarray, pos: int, count: int, k: int, term_one: bool):
    """Decode `count` zigzagged values starting at bit `pos`; returns
    (values, next bit position). Raises RiceDecodeError on truncation."""
    values, end = _rice_decode_bits(np.ascontiguousarray(bits, dtype=np.uint8), pos, count, k, term_one)
    end = int(end)
    if end < 0:
        raise RiceDecodeError(-end - 1)
    return np.asarray(values), end


def fixed_diff(x: np.ndarray, order: int) -> np.ndarray:
    return np.asarray(_fixed_diff(np.ascontiguousarray(x, dtype=np.int64), order))


def fixed_undiff(warm: np.ndarray, res: np.ndarray, order: int) -> np.ndarray:
    return np.asarray(_fixed_undiff(
        np.ascontiguousarray(warm, dtype=np.int64),
        np.ascontiguousarray(res, dtype=np.int64), order))


def crc8(data: bytes | np.ndarray, crc: int = 0) -> int:
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) else data
    return int(_crc8(np.ascontiguousarray(arr, dtype=np.uint8), CRC8_TABLE, crc))


def crc16(data: bytes | np.ndarray, crc: int = 0) -> int:
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) else data
    return int(_crc16(np.ascontiguousarray(arr, dtype=np.uint8), CRC16_TABLE, crc))


def implementations() -> dict:
    """Both paths of every kernel, for cross-checking and benchmarking.

    Returns {kernel: {"numpy": fn, "numba": fn | None}}.
    """
    out = {}
    for name, (np_impl, _loop) in _PAIRS.items():
        out[name] = {"numpy": np_impl, "numba": _JITTED.get(name)}
    return out


def active_path() -> str:
    return "numba" if USE_NUMBA else "numpy"
