"""Tree-walking reference decoders: Fast-SSC SC, CRC-aided SCL and ASCL.

The decoders walk the tree once per call and process a batch of frames in
lockstep (leading axis).  Path counts in list decoding depend only on the
tree, never on the data, so every frame of a batch sees the same sequence of
array shapes and the result for each frame equals decoding it alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..code_model import PmMode, frozen_set_for
from ..crc import crc_attach_batch, crc_check, crc_params_for
from .kernels import f_exact, f_kernel, fold_sum, g_kernel, seq_sum, _softplus_neg
from .tree import LIST_CAPS, SC_CAPS, UNPRUNED_CAPS, NodeClass, classify_tree, node_codewords

# frames x paths x node size of float64 kept per batch, about 32 MB
_BATCH_BUDGET = 1 << 22
# list leaves enumerate their codewords; larger leaves need a finer plan
MAX_LEAF_WORDS = 256


@dataclass
class DecodeOutcome:
    info: np.ndarray
    crc_ok: bool
    stage: int = 0
    work: int = 0
    codeword: np.ndarray = field(default=None, repr=False)
    metric: float = 0.0


@dataclass
class BatchOutcome:
    codewords: np.ndarray  # (frames, n)
    crc_ok: np.ndarray     # (frames,) bool
    stage: np.ndarray      # (frames,) int
    work: np.ndarray       # (frames,) int
    metric: np.ndarray     # (frames,) float

    def __len__(self):
        return self.codewords.shape[0]


class DecoderResources:
    """Everything a decoder needs for one code, derived once from a spec."""

    def __init__(self, spec, frozen_set=None, sc_caps=SC_CAPS, list_caps=LIST_CAPS):
        self.spec = spec
        self.frozen_set = frozen_set_for(spec) if frozen_set is None else frozen_set
        self.crc = crc_params_for(spec)
        self.info_positions = self.frozen_set.info_positions
        self.k_info = spec.k_info
        self.pm_mode = spec.pm_mode
        if self.pm_mode is PmMode.EXACT:
            # node-level shortcuts assume min-sum metrics; exact mode walks bit by bit
            sc_caps = list_caps = UNPRUNED_CAPS
        self.sc_plan = classify_tree(self.frozen_set, sc_caps)
        self.list_plan = classify_tree(self.frozen_set, list_caps)

    def outcome(self, codeword, stage=0, work=0, metric=0.0):
        bits = codeword[self.info_positions]
        ok = True if self.crc is None else bool(crc_check(bits, self.crc))
        return DecodeOutcome(bits[:self.k_info].copy(), ok, stage, work, codeword, metric)

    def crc_ok(self, bits):
        return True if self.crc is None else bool(crc_check(bits, self.crc))

    def crc_ok_rows(self, codewords):
        """CRC verdict for each row of a ``(..., n)`` codeword array."""
        shape = codewords.shape[:-1]
        if self.crc is None:
            return np.ones(shape, dtype=bool)
        bits = codewords[..., self.info_positions].reshape(-1, self.info_positions.size)
        ref = crc_attach_batch(bits[:, :-self.crc.width], self.crc)
        return np.all(ref[:, -self.crc.width:] == bits[:, -self.crc.width:], axis=1) \
            .reshape(shape)

    def info_rows(self, codewords):
        return codewords[..., self.info_positions[:self.k_info]]


def _as_batch(llrs, n):
    llrs = np.asarray(llrs, dtype=float)
    if llrs.ndim != 2 or llrs.shape[1] != n:
        raise ValueError(f"expected frames of {n} LLRs, got shape {llrs.shape}")
    return llrs


def _single(llr, n):
    llr = np.asarray(llr, dtype=float)
    if llr.shape != (n,):
        raise ValueError(f"expected {n} LLRs, got shape {llr.shape}")
    return llr[None, :]


class ScDecoder:
    def __init__(self, plan, resources, pm_mode=PmMode.APPROXIMATE):
        self.plan = plan
        self.res = resources
        self.f = f_exact if PmMode(pm_mode) is PmMode.EXACT else f_kernel
        self.work = 0

    def decode(self, llr):
        x = self._walk(_single(llr, self.plan.n))
        return self.res.outcome(x[0], 0, self.work)

    def decode_batch(self, llrs):
        llrs = _as_batch(llrs, self.plan.n)
        x = self._walk(llrs)
        frames = x.shape[0]
        return BatchOutcome(x, self.res.crc_ok_rows(x), np.zeros(frames, dtype=np.int64),
                            np.full(frames, self.work, dtype=np.int64), np.zeros(frames))

    def _walk(self, llrs):
        self.work = 0
        return self._node(self.plan.root, llrs)

    def _node(self, node, alpha):
        kind = node.kind
        if kind is NodeClass.GENERIC:
            self.work += 3
            h = node.size // 2
            a, b = alpha[:, :h], alpha[:, h:]
            bl = self._node(node.left, self.f(a, b))
            br = self._node(node.right, g_kernel(a, b, bl))
            return np.concatenate([bl ^ br, br], axis=1)
        self.work += 1
        if kind is NodeClass.RATE0:
            return np.zeros(alpha.shape, dtype=np.uint8)
        if kind is NodeClass.RATE1:
            return (alpha < 0).astype(np.uint8)
        if kind is NodeClass.REP:
            bit = (fold_sum(alpha) < 0).astype(np.uint8)
            return np.repeat(bit[:, None], node.size, axis=1)
        # SPC: hard decision, fix parity on the least reliable position
        x = (alpha < 0).astype(np.uint8)
        odd = np.flatnonzero(np.bitwise_xor.reduce(x, axis=1))
        if odd.size:
            worst = np.argmin(np.abs(alpha[odd]), axis=1)
            x[odd, worst] ^= 1
        return x


def _take_paths(x, idx):
    """``x[f, idx[f, j]]`` for every frame ``f`` and new path ``j``."""
    return np.take_along_axis(x, idx.reshape(idx.shape + (1,) * (x.ndim - 2)), axis=1)


class SclDecoder:
    """CRC-aided list decoder over a (possibly pruned) tree plan."""

    def __init__(self, plan, resources, list_size, pm_mode=PmMode.APPROXIMATE):
        if list_size < 1 or list_size & (list_size - 1):
            raise ValueError(f"list size must be a power of two, got {list_size}")
        self.plan = plan
        self.res = resources
        self.L = list_size
        self.exact = PmMode(pm_mode) is PmMode.EXACT
        if self.exact and not plan.is_unpruned():
            raise ValueError("exact path metrics need an unpruned plan")
        self.f = f_exact if self.exact else f_kernel
        self.work = 0
        self.pm = None
        self._words = {}
        for nd in plan.leaves():
            info = int(np.count_nonzero(~plan.frozen[nd.start:nd.start + nd.size]))
            if nd.kind is not NodeClass.REP and info > MAX_LEAF_WORDS.bit_length() - 1:
                raise ValueError(f"{nd.kind.value} leaf of size {nd.size} has too many "
                                 f"codewords for list decoding; use list caps")
            self._words[id(nd)] = node_codewords(plan.frozen[nd.start:nd.start + nd.size])

    def decode(self, llr):
        cands = self._walk(_single(llr, self.plan.n))
        best, ok = self._select(cands)
        out = self.res.outcome(cands[0, best[0]], 0, self.work, float(self.pm[0, best[0]]))
        out.crc_ok = bool(ok[0])
        return out

    def decode_batch(self, llrs):
        llrs = _as_batch(llrs, self.plan.n)
        step = max(1, _BATCH_BUDGET // (self.L * self.plan.n))
        parts = [self._decode_chunk(llrs[i:i + step]) for i in range(0, llrs.shape[0], step)]
        if not parts:
            n = self.plan.n
            return BatchOutcome(np.zeros((0, n), np.uint8), np.zeros(0, bool),
                                np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        return BatchOutcome(*(np.concatenate(cols) for cols in zip(*parts)))

    def _decode_chunk(self, llrs):
        cands = self._walk(llrs)
        best, ok = self._select(cands)
        rows = np.arange(llrs.shape[0])
        frames = rows.size
        return (cands[rows, best], ok, np.zeros(frames, dtype=np.int64),
                np.full(frames, self.work, dtype=np.int64), self.pm[rows, best])

    def _walk(self, llrs):
        self.work = 0
        self.pm = np.zeros((llrs.shape[0], 1))
        x, _ = self._node(self.plan.root, llrs[:, None, :])
        return x

    def _select(self, cands):
        """Lowest-metric CRC-passing path per frame, else the lowest-metric one."""
        order = np.argsort(self.pm, axis=1, kind="stable")
        passing = _take_paths(self.res.crc_ok_rows(cands), order)
        first = np.argmax(passing, axis=1)
        rows = np.arange(cands.shape[0])
        return order[rows, first], passing[rows, first]

    def _node(self, node, alpha):
        """Decode ``node`` for every active path of every frame.

        Returns the node codewords of the surviving paths and, for each, the
        index of the path it descends from at entry.
        """
        if node.kind is NodeClass.GENERIC:
            self.work += 3
            h = node.size // 2
            a, b = alpha[..., :h], alpha[..., h:]
            bl, anc = self._node(node.left, self.f(a, b))
            a, b = _take_paths(a, anc), _take_paths(b, anc)
            br, anc_r = self._node(node.right, g_kernel(a, b, bl))
            bl = _take_paths(bl, anc_r)
            return np.concatenate([bl ^ br, br], axis=2), _take_paths(anc, anc_r)
        self.work += 1
        words = self._words[id(node)]
        if self.exact:
            pen = self._exact_penalties(alpha, words)
        else:
            # min-sum metrics are additive over the node codeword
            mism = words[None, None, :, :] != (alpha < 0)[:, :, None, :]
            pen = seq_sum(np.where(mism, np.abs(alpha)[:, :, None, :], 0.0))
        frames, paths = self.pm.shape
        n_cand = words.shape[0]
        metrics = (self.pm[:, :, None] + pen).reshape(frames, paths * n_cand)
        if paths * n_cand <= self.L:
            keep = np.broadcast_to(np.arange(paths * n_cand), metrics.shape)
        else:
            keep = np.sort(np.argsort(metrics, axis=1, kind="stable")[:, :self.L], axis=1)
        self.pm = np.take_along_axis(metrics, keep, axis=1)
        return words[keep % n_cand], keep // n_cand

    @staticmethod
    def _exact_penalties(alpha, words):
        # size-1 leaves only
        u = words[:, 0].astype(float)
        return _softplus_neg((1.0 - 2.0 * u)[None, None, :] * alpha[:, :, :1])


def sc_decode(plan, llr, resources, pm_mode=PmMode.APPROXIMATE):
    return ScDecoder(plan, resources, pm_mode).decode(llr)


def scl_decode(plan, llr, list_size, resources, pm_mode=PmMode.APPROXIMATE):
    return SclDecoder(plan, resources, list_size, pm_mode).decode(llr)


class AsclDecoder:
    """SC first, then list decoding with growing list sizes until the CRC passes."""

    def __init__(self, resources, schedule=None):
        self.res = resources
        spec = resources.spec
        self.schedule = tuple(spec.list_schedule if schedule is None else schedule)
        self.sc = ScDecoder(resources.sc_plan, resources, resources.pm_mode)
        self.lists = [SclDecoder(resources.list_plan, resources, L, resources.pm_mode)
                      for L in self.schedule]

    def decode(self, llr):
        out = self.sc.decode(llr)
        work = out.work
        if out.crc_ok:
            return out
        for stage, dec in enumerate(self.lists, 1):
            out = dec.decode(llr)
            work += out.work
            out.stage = stage
            out.work = work
            if out.crc_ok:
                return out
        return out

    def decode_batch(self, llrs):
        llrs = _as_batch(llrs, self.res.frozen_set.n)
        out = self.sc.decode_batch(llrs)
        pending = np.flatnonzero(~out.crc_ok)
        for stage, dec in enumerate(self.lists, 1):
            if pending.size == 0:
                break
            part = dec.decode_batch(llrs[pending])
            out.codewords[pending] = part.codewords
            out.crc_ok[pending] = part.crc_ok
            out.stage[pending] = stage
            out.work[pending] += part.work
            out.metric[pending] = part.metric
            pending = pending[~part.crc_ok]
        return out


def ascl_decode(resources, llr):
    return AsclDecoder(resources).decode(llr)
