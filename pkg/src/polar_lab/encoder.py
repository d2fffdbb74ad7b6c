"""Bit-packed systematic polar encoder.

The encode path has four stages: assemble the source vector from the
information runs of the frozen set (frozen runs are skipped), pack it into
64-bit words, run the polar butterflies on packed words, and unpack with a
256-entry lookup table.  Packing is LSB-first: bit ``i`` of the frame is bit
``i % 64`` of word ``i // 64``.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass

import numba
import numpy as np

from .timing import read_cycles

WORD_BITS = 64

# bit-interleave masks selecting the lower half of every 2h-block, h = 1..32
_STAGE_MASKS = np.array([
    0x5555555555555555, 0x3333333333333333, 0x0F0F0F0F0F0F0F0F,
    0x00FF00FF00FF00FF, 0x0000FFFF0000FFFF, 0x00000000FFFFFFFF,
], dtype=np.uint64)

# gathers the low bit of each of 8 bytes into the top byte (LSB-first order)
_MOVEMASK_MAGIC = np.uint64(0x0102040810204080)


def _unpack_table():
    table = np.zeros(256, dtype=np.uint64)
    for b in range(256):
        v = 0
        for k in range(8):
            v |= ((b >> k) & 1) << (8 * k)
        table[b] = v
    return table


UNPACK_LUT = _unpack_table()
_LITTLE = sys.byteorder == "little"


@dataclass
class PackedBits:
    words: np.ndarray
    bit_len: int

    @classmethod
    def zeros(cls, bit_len):
        return cls(np.zeros(n_words(bit_len), dtype=np.uint64), bit_len)

    def padding_is_zero(self):
        tail = self.bit_len % WORD_BITS
        if tail == 0:
            return True
        return int(self.words[-1]) >> tail == 0


def n_words(bit_len):
    return max(1, -(-bit_len // WORD_BITS))


@numba.njit(cache=True)
def _pack_into(src, words):
    # src: uint8 0/1 bytes, length 64 * words.size
    if _LITTLE:
        chunks = src.view(np.uint64)
        for j in range(words.size):
            acc = np.uint64(0)
            for k in range(8):
                byte = (chunks[8 * j + k] * _MOVEMASK_MAGIC) >> np.uint64(56)
                acc |= byte << np.uint64(8 * k)
            words[j] = acc
    else:
        for j in range(words.size):
            acc = np.uint64(0)
            for k in range(64):
                acc |= np.uint64(src[64 * j + k] & 1) << np.uint64(k)
            words[j] = acc


@numba.njit(cache=True)
def _unpack_into(words, out):
    # out: uint8, length 64 * words.size
    if _LITTLE:
        out64 = out.view(np.uint64)
        for j in range(words.size):
            w = words[j]
            for k in range(8):
                out64[8 * j + k] = UNPACK_LUT[(w >> np.uint64(8 * k)) & np.uint64(0xFF)]
    else:
        for j in range(words.size):
            w = words[j]
            for k in range(64):
                out[64 * j + k] = np.uint8((w >> np.uint64(k)) & np.uint64(1))


@numba.njit(cache=True)
def _transform_words(words, n):
    """In-place x = u F^{(x)m} on packed words; ``n`` is the frame length."""
    nw = words.size
    h = 1
    s = 0
    while h < n and h < 64:
        m = _STAGE_MASKS[s]
        sh = np.uint64(h)
        for i in range(nw):
            x = words[i]
            words[i] = x ^ ((x >> sh) & m)
        h *= 2
        s += 1
    hw = 1
    while hw < nw:
        for base in range(0, nw, 2 * hw):
            for k in range(hw):
                words[base + k] ^= words[base + hw + k]
        hw *= 2


@numba.njit(cache=True)
def _systematic_into(msg, run_start, run_len, run_src, info_mask, n, n_tx,
                     src_buf, words, out_buf, out):
    # stage 1: source vector; frozen runs are never touched (buffer stays zero)
    for r in range(run_start.size):
        a = run_start[r]
        b = run_src[r]
        for i in range(run_len[r]):
            src_buf[a + i] = msg[b + i]
    # stage 2 + 3: pack, transform, mask frozen, transform
    _pack_into(src_buf, words)
    _transform_words(words, n)
    for j in range(words.size):
        words[j] &= info_mask[j]
    _transform_words(words, n)
    # stage 4: unpack and shorten
    _unpack_into(words, out_buf)
    for i in range(n_tx):
        out[i] = out_buf[i]
    for r in range(run_start.size):
        a = run_start[r]
        for i in range(run_len[r]):
            src_buf[a + i] = 0


@numba.njit(cache=True)
def _systematic_batch(msgs, run_start, run_len, run_src, info_mask, n, n_tx, out):
    nw = info_mask.size
    src_buf = np.zeros(64 * nw, dtype=np.uint8)
    out_buf = np.zeros(64 * nw, dtype=np.uint8)
    words = np.zeros(nw, dtype=np.uint64)
    for f in range(msgs.shape[0]):
        _systematic_into(msgs[f], run_start, run_len, run_src, info_mask, n, n_tx,
                         src_buf, words, out_buf, out[f])


def _runs(frozen):
    """Maximal runs of information positions as ``(start, length)`` pairs."""
    info = ~np.asarray(frozen, dtype=bool)
    edges = np.diff(np.concatenate([[0], info.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return starts, ends - starts


class EncoderPlan:
    """Static description of the source vector derived from a frozen set."""

    def __init__(self, frozen_set, n_tx=None):
        self.frozen_set = frozen_set
        self.n = frozen_set.n
        if self.n & (self.n - 1):
            raise ValueError(f"mother length must be a power of two, got {self.n}")
        self.n_tx = self.n if n_tx is None else int(n_tx)
        self.info_count = frozen_set.info_count
        starts, lengths = _runs(frozen_set.frozen)
        self.run_start = starts.astype(np.int64)
        self.run_len = lengths.astype(np.int64)
        self.run_src = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64) \
            if lengths.size else np.zeros(0, dtype=np.int64)
        self.info_mask = pack_bits((~frozen_set.frozen).astype(np.uint8)).words

    def segments(self):
        """Partition of the source indices as ``(start, length, is_info)``."""
        segs, pos = [], 0
        for a, ln in zip(self.run_start.tolist(), self.run_len.tolist()):
            if a > pos:
                segs.append((pos, a - pos, False))
            segs.append((a, ln, True))
            pos = a + ln
        if pos < self.n:
            segs.append((pos, self.n - pos, False))
        return segs


def pack_bits(bits):
    bits = np.asarray(bits, dtype=np.uint8)
    nw = n_words(bits.size)
    buf = np.zeros(64 * nw, dtype=np.uint8)
    buf[:bits.size] = bits
    words = np.zeros(nw, dtype=np.uint64)
    _pack_into(buf, words)
    return PackedBits(words, bits.size)


def unpack_lut(packed):
    out = np.zeros(64 * packed.words.size, dtype=np.uint8)
    _unpack_into(packed.words, out)
    return out[:packed.bit_len]


def assemble_source(info_plus_crc, plan):
    msg = np.asarray(info_plus_crc, dtype=np.uint8)
    if msg.size != plan.info_count:
        raise ValueError(f"expected {plan.info_count} bits, got {msg.size}")
    u = np.zeros(plan.n, dtype=np.uint8)
    for a, ln, src in zip(plan.run_start, plan.run_len, plan.run_src):
        u[a:a + ln] = msg[src:src + ln]
    return pack_bits(u)


def polar_transform_packed(u):
    n = u.bit_len
    if n < 1 or n & (n - 1):
        raise ValueError(f"transform length must be a power of two, got {n}")
    words = u.words.copy()
    _transform_words(words, n)
    return PackedBits(words, n)


def systematic_encode(info_plus_crc, plan):
    """Codeword (first ``n_tx`` bits) whose info positions carry the input."""
    msg = np.asarray(info_plus_crc, dtype=np.uint8)
    if msg.size != plan.info_count:
        raise ValueError(f"expected {plan.info_count} bits, got {msg.size}")
    out = np.zeros((1, plan.n_tx), dtype=np.uint8)
    _systematic_batch(msg[None, :], plan.run_start, plan.run_len, plan.run_src,
                      plan.info_mask, plan.n, plan.n_tx, out)
    return out[0]


def systematic_encode_batch(msgs, plan):
    msgs = np.ascontiguousarray(msgs, dtype=np.uint8)
    if msgs.ndim != 2 or msgs.shape[1] != plan.info_count:
        raise ValueError(f"expected shape (frames, {plan.info_count}), got {msgs.shape}")
    out = np.zeros((msgs.shape[0], plan.n_tx), dtype=np.uint8)
    _systematic_batch(msgs, plan.run_start, plan.run_len, plan.run_src,
                      plan.info_mask, plan.n, plan.n_tx, out)
    return out


class SystematicEncoder:
    """Reusable single-frame encoder holding its scratch buffers."""

    def __init__(self, plan):
        self.plan = plan
        nw = plan.info_mask.size
        self._src = np.zeros(64 * nw, dtype=np.uint8)
        self._out = np.zeros(64 * nw, dtype=np.uint8)
        self._words = np.zeros(nw, dtype=np.uint64)

    def __call__(self, msg, out=None):
        p = self.plan
        if out is None:
            out = np.zeros(p.n_tx, dtype=np.uint8)
        _systematic_into(msg, p.run_start, p.run_len, p.run_src, p.info_mask, p.n,
                         p.n_tx, self._src, self._words, self._out, out)
        return out


# -- byte-per-bit reference -------------------------------------------------

@numba.njit(cache=True)
def _naive_transform(x):
    n = x.size
    h = 1
    while h < n:
        for base in range(0, n, 2 * h):
            for k in range(h):
                x[base + k] ^= x[base + h + k]
        h *= 2


@numba.njit(cache=True)
def _naive_systematic_into(msg, info_pos, frozen, n_tx, u, out):
    for i in range(u.size):
        u[i] = 0
    for j in range(info_pos.size):
        u[info_pos[j]] = msg[j]
    _naive_transform(u)
    for i in range(u.size):
        if frozen[i]:
            u[i] = 0
    _naive_transform(u)
    for i in range(n_tx):
        out[i] = u[i]


class NaiveEncoder:
    """Byte-per-bit systematic encoder used as a reference and baseline."""

    def __init__(self, frozen_set, n_tx=None):
        self.n = frozen_set.n
        self.n_tx = self.n if n_tx is None else int(n_tx)
        self.info_pos = frozen_set.info_positions.astype(np.int64)
        self.frozen = frozen_set.frozen.astype(np.uint8)
        self._u = np.zeros(self.n, dtype=np.uint8)

    def __call__(self, msg, out=None):
        if out is None:
            out = np.zeros(self.n_tx, dtype=np.uint8)
        _naive_systematic_into(msg, self.info_pos, self.frozen, self.n_tx, self._u, out)
        return out


def polar_transform_bytes(u):
    x = np.array(u, dtype=np.uint8)
    _naive_transform(x)
    return x


# -- timing loops -------------------------------------------------------------

@numba.njit(cache=True)
def _time_systematic(msgs, run_start, run_len, run_src, info_mask, n, n_tx, ticks):
    nw = info_mask.size
    src_buf = np.zeros(64 * nw, dtype=np.uint8)
    out_buf = np.zeros(64 * nw, dtype=np.uint8)
    words = np.zeros(nw, dtype=np.uint64)
    out = np.zeros(n_tx, dtype=np.uint8)
    for f in range(msgs.shape[0]):
        t0 = read_cycles()
        _systematic_into(msgs[f], run_start, run_len, run_src, info_mask, n, n_tx,
                         src_buf, words, out_buf, out)
        ticks[f] = read_cycles() - t0


@numba.njit(cache=True)
def _time_naive(msgs, info_pos, frozen, n_tx, ticks):
    u = np.zeros(frozen.size, dtype=np.uint8)
    out = np.zeros(n_tx, dtype=np.uint8)
    for f in range(msgs.shape[0]):
        t0 = read_cycles()
        _naive_systematic_into(msgs[f], info_pos, frozen, n_tx, u, out)
        ticks[f] = read_cycles() - t0


def encode_ticks(encoder, msgs):
    """Cycle-counter ticks of each single-frame encode, timed in compiled code."""
    msgs = np.ascontiguousarray(msgs, dtype=np.uint8)
    ticks = np.zeros(msgs.shape[0], dtype=np.int64)
    if isinstance(encoder, SystematicEncoder):
        p = encoder.plan
        _time_systematic(msgs, p.run_start, p.run_len, p.run_src, p.info_mask, p.n, p.n_tx,
                         ticks)
    elif isinstance(encoder, NaiveEncoder):
        _time_naive(msgs, encoder.info_pos, encoder.frozen, encoder.n_tx, ticks)
    else:
        raise TypeError(f"no compiled timing loop for {type(encoder).__name__}")
    return ticks


# -- dense generator-matrix reference ---------------------------------------

def generator_matrix(n):
    """``F^{(x)m}`` for ``n = 2^m`` as a dense 0/1 matrix (row ``i`` is ``e_i G``)."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    g = np.ones((1, 1), dtype=np.uint8)
    kernel = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    while g.shape[0] < n:
        g = np.kron(g, kernel)
    return g


def _gf2_matmul(a, g):
    # integer sums stay below 2^24, so float32 products are exact
    return (a.astype(np.float32) @ g.astype(np.float32)).astype(np.int64) % 2


class MatrixEncoder:
    """Systematic encoding as two GF(2) products with the generator matrix:
    ``x = ((u G) with frozen positions cleared) G``."""

    def __init__(self, frozen_set, n_tx=None):
        self.n = frozen_set.n
        self.n_tx = self.n if n_tx is None else int(n_tx)
        self.info_pos = frozen_set.info_positions
        self.frozen = frozen_set.frozen
        self.g = generator_matrix(self.n)

    def encode_batch(self, msgs):
        msgs = np.atleast_2d(np.asarray(msgs, dtype=np.uint8))
        u = np.zeros((msgs.shape[0], self.n), dtype=np.uint8)
        u[:, self.info_pos] = msgs
        v = _gf2_matmul(u, self.g)
        v[:, self.frozen] = 0
        return _gf2_matmul(v, self.g)[:, :self.n_tx].astype(np.uint8)

    def __call__(self, msg):
        return self.encode_batch(msg)[0]
