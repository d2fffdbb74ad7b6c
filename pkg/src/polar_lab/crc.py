"""Parametric CRC over bit sequences.

Conventions: zero initial register, no reflection, no final XOR, bits fed
most-significant first; the CRC is returned MSB first.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np


@dataclass(frozen=True)
class CrcParams:
    width: int
    poly: int
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 4 <= self.width <= 16:
            raise ValueError(f"CRC width must be in 4..16, got {self.width}")
        if not 0 <= self.poly < (1 << self.width):
            raise ValueError(f"poly 0x{self.poly:X} does not fit in {self.width} bits")
        table = _byte_table(self.width, self.poly)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def reg_width(self):
        return max(self.width, 8)


def crc_params_for(spec):
    return CrcParams(spec.crc_size, spec.crc_poly) if spec.crc_size else None


def _byte_table(width, poly):
    # register widened to >= 8 bits so a whole byte can be shifted in at once
    rw = max(width, 8)
    p = poly << (rw - width)
    top = 1 << (rw - 1)
    mask = (1 << rw) - 1
    table = np.zeros(256, dtype=np.uint32)
    for byte in range(256):
        reg = byte << (rw - 8)
        for _ in range(8):
            reg = ((reg << 1) ^ p) if reg & top else (reg << 1)
            reg &= mask
        table[byte] = reg
    return table


def crc_register(bits, params):
    """CRC of ``bits`` as an integer (``params.width`` bits)."""
    bits = np.asarray(bits, dtype=np.uint8)
    rw = params.reg_width
    shift = rw - params.width
    p = params.poly << shift
    top = 1 << (rw - 1)
    mask = (1 << rw) - 1
    table = params.table
    head = bits.size % 8
    reg = 0
    for b in bits[:head]:
        reg ^= int(b) << (rw - 1)
        reg = ((reg << 1) ^ p) & mask if reg & top else (reg << 1) & mask
    if bits.size > head:
        body = np.packbits(bits[head:])  # MSB-first bytes
        for byte in body.tolist():
            reg = ((reg << 8) & mask) ^ int(table[((reg >> (rw - 8)) ^ byte) & 0xFF])
    return reg >> shift


def _int_to_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def crc_compute(message, params):
    message = np.asarray(message, dtype=np.uint8)
    if message.size == 0:
        raise ValueError("message must be non-empty")
    return _int_to_bits(crc_register(message, params), params.width)


def crc_check(frame, params):
    frame = np.asarray(frame, dtype=np.uint8)
    if frame.size <= params.width:
        raise ValueError("frame must be longer than the CRC")
    w = params.width
    tail = 0
    for b in frame[-w:].tolist():
        tail = (tail << 1) | b
    return crc_register(frame[:-w], params) == tail


def crc_attach(message, params):
    message = np.asarray(message, dtype=np.uint8)
    if params is None:
        return message.copy()
    return np.concatenate([message, crc_compute(message, params)])


@numba.njit(cache=True)
def _attach_batch(msgs, width, poly, table, out):
    frames, m = msgs.shape
    rw = max(width, 8)
    shift = rw - width
    mask = (1 << rw) - 1
    top = 1 << (rw - 1)
    p = poly << shift
    head = m % 8
    for f in range(frames):
        reg = 0
        for i in range(head):
            reg ^= np.int64(msgs[f, i]) << (rw - 1)
            if reg & top:
                reg = ((reg << 1) ^ p) & mask
            else:
                reg = (reg << 1) & mask
        for j in range(head, m, 8):
            byte = 0
            for k in range(8):
                byte = (byte << 1) | np.int64(msgs[f, j + k])
            reg = ((reg << 8) & mask) ^ np.int64(table[((reg >> (rw - 8)) ^ byte) & 0xFF])
        crc = reg >> shift
        for i in range(m):
            out[f, i] = msgs[f, i]
        for i in range(width):
            out[f, m + i] = (crc >> (width - 1 - i)) & 1


def crc_attach_batch(messages, params):
    """Row-wise :func:`crc_attach` for a ``(frames, k)`` bit matrix."""
    messages = np.ascontiguousarray(messages, dtype=np.uint8)
    if params is None:
        return messages.copy()
    frames, k = messages.shape
    out = np.empty((frames, k + params.width), dtype=np.uint8)
    _attach_batch(messages, params.width, params.poly, params.table.astype(np.int64), out)
    return out


def crc_long_division(message, params):
    """Bit-serial polynomial long division; kept as an independent oracle."""
    w = params.width
    gen = [1] + [(params.poly >> (w - 1 - i)) & 1 for i in range(w)]
    work = [int(b) for b in message] + [0] * w
    for i in range(len(message)):
        if work[i]:
            for j in range(w + 1):
                work[i + j] ^= gen[j]
    return np.array(work[-w:], dtype=np.uint8)


def crc_long_division_batch(messages, params):
    """Long division of every row of a ``(frames, k)`` bit matrix at once."""
    messages = np.asarray(messages, dtype=np.uint8)
    frames, k = messages.shape
    w = params.width
    gen = np.array([1] + [(params.poly >> (w - 1 - i)) & 1 for i in range(w)], dtype=np.uint8)
    work = np.zeros((frames, k + w), dtype=np.uint8)
    work[:, :k] = messages
    for i in range(k):
        work[:, i:i + w + 1] ^= work[:, i:i + 1] * gen
    return work[:, k:].copy()
