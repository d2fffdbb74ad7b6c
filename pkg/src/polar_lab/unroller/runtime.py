"""Compiled kernels behind the interpreter and the emitted decoders.

Single-path (SC) kernels work on ``lv`` (float64, ``2n - 1`` lanes, level 0
holding the channel frame) and ``bits`` (uint8, ``n`` lanes).

List kernels keep one row of ``lv[L, 2n]`` and ``bits[L, n]`` per physical
slot.  Paths are addressed logically: ``slots[:L]`` maps logical path ``p``
to its physical row and ``pm[p]`` is its metric.  Level 0 is read from the
shared ``llr_in``.  On a prune the first surviving child of a path inherits
its parent's row, and further children are copied into rows freed by dead
paths, moving only the LLR levels that are read again.

Arithmetic mirrors the reference decoders operation for operation so
outputs are bit-exact.
"""
import numba
import numpy as np
from numba import types

from ..timing import read_cycles  # noqa: F401  (used by emitted timing loops)

REP_TABLE = -1

# Explicit signatures keep numba from specializing every kernel on the literal
# arguments at each call site of an emitted decoder, which would mean one
# compilation per node.
_i = types.int64
_b = types.boolean
_f1 = types.Array(types.float64, 1, "C")
_f2 = types.Array(types.float64, 2, "C")
_u1 = types.Array(types.uint8, 1, "C")
_u2 = types.Array(types.uint8, 2, "C")
_u3 = types.Array(types.uint8, 3, "C")
_i1 = types.Array(types.int64, 1, "C")


def _kernel(*sigs):
    return numba.njit(list(sigs), cache=True)


@numba.njit(cache=True)
def _sign(x):
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


@numba.njit(cache=True)
def _f(a, b, exact):
    m = _sign(a) * _sign(b) * min(abs(a), abs(b))
    if exact:
        return m + np.log1p(np.exp(-abs(a + b))) - np.log1p(np.exp(-abs(a - b)))
    return m


@numba.njit(cache=True)
def _softplus_neg(x):
    return max(-x, 0.0) + np.log1p(np.exp(-abs(x)))


@numba.njit(cache=True)
def crc_ok(cw, info_pos, crc_w, poly, table):
    if crc_w == 0:
        return True
    m = info_pos.size - crc_w
    rw = max(crc_w, 8)
    shift = rw - crc_w
    mask = (1 << rw) - 1
    top = 1 << (rw - 1)
    p = poly << shift
    reg = 0
    head = m % 8
    for i in range(head):
        reg ^= np.int64(cw[info_pos[i]]) << (rw - 1)
        if reg & top:
            reg = ((reg << 1) ^ p) & mask
        else:
            reg = (reg << 1) & mask
    for j in range(head, m, 8):
        byte = 0
        for k in range(8):
            byte = (byte << 1) | np.int64(cw[info_pos[j + k]])
        reg = ((reg << 8) & mask) ^ np.int64(table[((reg >> (rw - 8)) ^ byte) & 0xFF])
    tail = 0
    for i in range(m, m + crc_w):
        tail = (tail << 1) | np.int64(cw[info_pos[i]])
    return (reg >> shift) == tail


# -- successive cancellation -------------------------------------------------

@_kernel(types.void(_f1, _f1, _i))
def sc_load(lv, llr_in, n):
    for i in range(n):
        lv[i] = llr_in[i]


@_kernel(types.void(_f1, _i, _i, _i, _b))
def sc_f(lv, src, dst, h, exact):
    for i in range(h):
        lv[dst + i] = _f(lv[src + i], lv[src + h + i], exact)


@_kernel(types.void(_f1, _u1, _i, _i, _i, _i))
def sc_g(lv, bits, src, dst, boff, h):
    for i in range(h):
        a = lv[src + i]
        if bits[boff + i]:
            a = -a
        lv[dst + i] = lv[src + h + i] + a


@_kernel(types.void(_u1, _i, _i))
def sc_combine(bits, boff, h):
    for i in range(h):
        bits[boff + i] ^= bits[boff + h + i]


@_kernel(types.void(_u1, _i, _i))
def sc_rate0(bits, boff, w):
    for i in range(w):
        bits[boff + i] = 0


@_kernel(types.void(_f1, _u1, _i, _i, _i))
def sc_rate1(lv, bits, src, boff, w):
    for i in range(w):
        bits[boff + i] = 1 if lv[src + i] < 0 else 0


@_kernel(types.void(_f1, _u1, _f1, _i, _i, _i))
def sc_rep(lv, bits, tmp, src, boff, w):
    for i in range(w):
        tmp[i] = lv[src + i]
    h = w // 2
    while h >= 1:
        for i in range(h):
            tmp[i] = tmp[h + i] + tmp[i]
        h //= 2
    b = 1 if tmp[0] < 0 else 0
    for i in range(w):
        bits[boff + i] = b


@_kernel(types.void(_f1, _u1, _i, _i, _i))
def sc_spc(lv, bits, src, boff, w):
    parity = 0
    worst = 0
    worst_mag = abs(lv[src])
    for i in range(w):
        a = lv[src + i]
        b = 1 if a < 0 else 0
        bits[boff + i] = b
        parity ^= b
        if abs(a) < worst_mag:
            worst_mag = abs(a)
            worst = i
    if parity:
        bits[boff + worst] ^= 1


@_kernel(_b(_u1, _i, _i1, _i, _i, _i1, _u1))
def sc_select(bits, n, info_pos, crc_w, poly, table, out):
    for i in range(n):
        out[i] = bits[i]
    return crc_ok(bits, info_pos, crc_w, poly, table)


# -- list decoding -----------------------------------------------------------

# Each kernel picks the LLR row of a path once: the shared channel frame for
# level 0, the path's own row otherwise.  (Deciding per element is an order of
# magnitude slower.)

@_kernel(types.void(_f1, _f2, _i1, _i, _i, _i, _i, _i, _b))
def ls_f(llr_in, lv, slots, npath, src, dst, h, n, exact):
    for p in range(npath):
        s = slots[p]
        row = llr_in if src < n else lv[s]
        for i in range(h):
            lv[s, dst + i] = _f(row[src + i], row[src + h + i], exact)


@_kernel(types.void(_f1, _f2, _u2, _i1, _i, _i, _i, _i, _i, _i))
def ls_g(llr_in, lv, bits, slots, npath, src, dst, boff, h, n):
    for p in range(npath):
        s = slots[p]
        row = llr_in if src < n else lv[s]
        for i in range(h):
            a = row[src + i]
            if bits[s, boff + i]:
                a = -a
            lv[s, dst + i] = row[src + h + i] + a


@_kernel(types.void(_u2, _i1, _i, _i, _i))
def ls_combine(bits, slots, npath, boff, h):
    for p in range(npath):
        s = slots[p]
        for i in range(h):
            bits[s, boff + i] ^= bits[s, boff + h + i]


@_kernel(types.void(_f1, _f2, _u2, _f1, _i1, _i, _i, _i, _i, _i, _b))
def ls_rate0(llr_in, lv, bits, pm, slots, npath, src, boff, w, n, exact):
    for p in range(npath):
        s = slots[p]
        row = llr_in if src < n else lv[s]
        acc = 0.0
        for i in range(w):
            a = row[src + i]
            if exact:
                acc += _softplus_neg(a)
            elif a < 0:
                acc += abs(a)
            bits[s, boff + i] = 0
        pm[p] = pm[p] + acc


@_kernel(types.void(_f1, _f2, _i1, _i, _i, _i, _i, _u3, _i, _i, _f1, _b))
def ls_leaf(llr_in, lv, slots, npath, src, w, n, tables, t, n_cand, cand, exact):
    """Per-path penalty of every candidate codeword of a leaf node."""
    for p in range(npath):
        row = llr_in if src < n else lv[slots[p]]
        base = p * n_cand
        if t == REP_TABLE:
            # all-zero and all-one words, summed in the same order as the table case
            acc0 = 0.0
            acc1 = 0.0
            for i in range(w):
                a = row[src + i]
                if a < 0:
                    acc0 += abs(a)
                else:
                    acc1 += abs(a)
            cand[base] = acc0
            cand[base + 1] = acc1
            continue
        for c in range(n_cand):
            acc = 0.0
            for i in range(w):
                a = row[src + i]
                x = tables[t, c, i]
                if exact:
                    acc += _softplus_neg((1.0 - 2.0 * x) * a)
                elif (x == 1) != (a < 0):
                    acc += abs(a)
            cand[base + c] = acc


@_kernel(types.void(_f1, _i, _i, _f1))
def ls_fork(pm, npath, n_cand, cand):
    for p in range(npath):
        for c in range(n_cand):
            cand[p * n_cand + c] = pm[p] + cand[p * n_cand + c]


@numba.njit(cache=True)
def kth_smallest(vals, total, k):
    """``k``-th smallest (0-based) of ``vals[:total]`` by quickselect."""
    buf = vals[:total].copy()
    lo = 0
    hi = total - 1
    while lo < hi:
        a = buf[lo]
        b = buf[(lo + hi) // 2]
        c = buf[hi]
        pivot = max(min(a, b), min(max(a, b), c))
        i = lo
        j = hi
        while i <= j:
            while buf[i] < pivot:
                i += 1
            while buf[j] > pivot:
                j -= 1
            if i <= j:
                buf[i], buf[j] = buf[j], buf[i]
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return buf[k]


@_kernel(_i(_f1, _i, _i, _i1))
def select_survivors(cand, total, list_size, sel):
    """Indices of the ``list_size`` smallest of ``cand[:total]``, ascending.

    Ties are broken by index, so the set equals the first ``list_size``
    entries of a stable argsort; it is found in linear time.  Returns the
    number of indices written to ``sel``.
    """
    if total <= list_size:
        for j in range(total):
            sel[j] = j
        return total
    thr = kth_smallest(cand, total, list_size - 1)
    n_eq = list_size
    for k in range(total):
        if cand[k] < thr:
            n_eq -= 1
    j = 0
    for k in range(total):
        v = cand[k]
        if v < thr:
            sel[j] = k
            j += 1
        elif v == thr and n_eq > 0:
            n_eq -= 1
            sel[j] = k
            j += 1
    return list_size


@_kernel(_i(_f2, _u2, _f1, _f1, _i1, _i1, _i, _i, _i, _i, _i, _i, _i, _u3, _i))
def ls_prune(lv, bits, pm, cand, sel, slots, npath, n_cand, list_size, n,
             copy_levels, boff, w, tables, t):
    """Keep the ``list_size`` best candidates (stable), in candidate order.

    ``slots`` holds five int64 blocks of ``list_size``: the logical to
    physical map, its replacement, per-parent child counts, a physical-row
    usage mark and a free-row stack.  Returns the new path count.
    """
    L = list_size
    kept = select_survivors(cand, npath * n_cand, L, sel)
    phys = slots[:L]
    new_phys = slots[L:2 * L]
    count = slots[2 * L:3 * L]
    used = slots[3 * L:4 * L]
    free = slots[4 * L:5 * L]
    for p in range(npath):
        count[p] = 0
    for r in range(L):
        used[r] = 0
    for j in range(kept):
        count[sel[j] // n_cand] += 1
    for p in range(npath):
        if count[p] > 0:
            used[phys[p]] = 1
    n_free = 0
    for r in range(L):
        if used[r] == 0:
            free[n_free] = r
            n_free += 1
    for j in range(kept):
        idx = sel[j]
        p = idx // n_cand
        src_row = phys[p]
        if used[src_row] == 1:
            # first child takes over the parent's row
            used[src_row] = 2
            row = src_row
        else:
            n_free -= 1
            row = free[n_free]
            lvl_size = n
            lvl_off = 0
            d = 1
            while (copy_levels >> d) != 0:
                lvl_off += lvl_size
                lvl_size //= 2
                if (copy_levels >> d) & 1:
                    for k in range(lvl_off, lvl_off + lvl_size):
                        lv[row, k] = lv[src_row, k]
                d += 1
            for k in range(boff):
                bits[row, k] = bits[src_row, k]
        new_phys[j] = row
        pm[j] = cand[idx]
    for j in range(kept):
        row = new_phys[j]
        c = sel[j] % n_cand
        for i in range(w):
            bits[row, boff + i] = c if t == REP_TABLE else tables[t, c, i]
        phys[j] = row
    return kept


@_kernel(_i(_f1, _i1, _i))
def ls_start(pm, slots, list_size):
    for r in range(list_size):
        slots[r] = r
    pm[0] = 0.0
    return 1


@_kernel(_b(_u2, _f1, _i1, _i, _i, _i1, _i, _i, _i1, _u1))
def ls_select(bits, pm, slots, npath, n, info_pos, crc_w, poly, table, out):
    order = np.argsort(pm[:npath], kind="mergesort")
    chosen = -1
    for r in range(npath):
        if crc_ok(bits[slots[order[r]]], info_pos, crc_w, poly, table):
            chosen = order[r]
            break
    row = slots[order[0] if chosen < 0 else chosen]
    for i in range(n):
        out[i] = bits[row, i]
    return chosen >= 0


# -- program interpreter -----------------------------------------------------

OP_F, OP_G, OP_COMBINE, OP_RATE0, OP_RATE1, OP_REP, OP_SPC, \
    OP_FORK, OP_PRUNE, OP_CRC = range(10)


@numba.njit(cache=True)
def interpret(code, n, list_size, exact, llr_in, sc_lv, sc_bits, tmp,
              lv, bits, pm, cand, sel, slots, tables, info_pos, crc_w, poly,
              crc_table, out):
    """Execute an encoded program; returns ``(crc_ok, node_ops)``."""
    work = 0
    if list_size == 1:
        sc_load(sc_lv, llr_in, n)
        for r in range(code.shape[0]):
            op = code[r, 0]
            w = code[r, 1]
            src = code[r, 2]
            dst = code[r, 3]
            boff = code[r, 4]
            if op == OP_F:
                sc_f(sc_lv, src, dst, w, exact)
            elif op == OP_G:
                sc_g(sc_lv, sc_bits, src, dst, boff, w)
            elif op == OP_COMBINE:
                sc_combine(sc_bits, boff, w)
            elif op == OP_RATE0:
                sc_rate0(sc_bits, boff, w)
            elif op == OP_RATE1:
                sc_rate1(sc_lv, sc_bits, src, boff, w)
            elif op == OP_REP:
                sc_rep(sc_lv, sc_bits, tmp, src, boff, w)
            elif op == OP_SPC:
                sc_spc(sc_lv, sc_bits, src, boff, w)
            elif op == OP_CRC:
                return sc_select(sc_bits, n, info_pos, crc_w, poly, crc_table, out), work
            if op != OP_CRC:
                work += 1
        return False, work
    npath = ls_start(pm, slots, list_size)
    for r in range(code.shape[0]):
        op = code[r, 0]
        w = code[r, 1]
        src = code[r, 2]
        dst = code[r, 3]
        boff = code[r, 4]
        n_cand = code[r, 5]
        t = code[r, 6]
        if op == OP_F:
            ls_f(llr_in, lv, slots, npath, src, dst, w, n, exact)
        elif op == OP_G:
            ls_g(llr_in, lv, bits, slots, npath, src, dst, boff, w, n)
        elif op == OP_COMBINE:
            ls_combine(bits, slots, npath, boff, w)
        elif op == OP_RATE0:
            ls_rate0(llr_in, lv, bits, pm, slots, npath, src, boff, w, n, exact)
        elif op == OP_RATE1 or op == OP_REP or op == OP_SPC:
            ls_leaf(llr_in, lv, slots, npath, src, w, n, tables, t, n_cand, cand, exact)
        elif op == OP_FORK:
            ls_fork(pm, npath, n_cand, cand)
        elif op == OP_PRUNE:
            npath = ls_prune(lv, bits, pm, cand, sel, slots, npath, n_cand,
                             code[r, 7], n, code[r, 8], boff, w, tables, t)
        elif op == OP_CRC:
            return ls_select(bits, pm, slots, npath, n, info_pos, crc_w, poly,
                             crc_table, out), work
        if op < OP_FORK:
            work += 1
    return False, work
