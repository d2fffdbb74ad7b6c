"""LLR kernels and path-metric updates shared by the reference decoders."""
import numpy as np

from ..code_model import PmMode

# LLR assigned to known (shortened) zeros; finite so arithmetic stays total.
SATURATION_LLR = 1000.0


def f_kernel(a, b):
    """Min-sum check-node update."""
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def f_exact(a, b):
    """Exact box-plus, ``2 atanh(tanh(a/2) tanh(b/2))``, in a stable form."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (f_kernel(a, b) + np.log1p(np.exp(-np.abs(a + b)))
            - np.log1p(np.exp(-np.abs(a - b))))


def g_kernel(a, b, s):
    return b + (1 - 2 * np.asarray(s, dtype=np.int8)) * a


def hard(llr):
    return (np.asarray(llr) < 0).astype(np.uint8)


def _softplus_neg(x):
    # log(1 + exp(-x)) without overflow
    x = np.asarray(x, dtype=float)
    return np.maximum(-x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def path_metric_update(pm, llr, decision, mode=PmMode.APPROXIMATE):
    llr = np.asarray(llr, dtype=float)
    decision = np.asarray(decision)
    if PmMode(mode) is PmMode.EXACT:
        return pm + _softplus_neg((1 - 2 * decision) * llr)
    return pm + np.where(decision != (llr < 0), np.abs(llr), 0.0)


def fold_sum(alpha):
    """Sum along the last axis by repeated halving (the order SC uses)."""
    a = np.asarray(alpha, dtype=float)
    while a.shape[-1] > 1:
        h = a.shape[-1] // 2
        a = a[..., h:] + a[..., :h]
    return a[..., 0]


def seq_sum(x):
    """Left-to-right sum along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 0:
        return np.zeros(x.shape[:-1])
    return np.cumsum(x, axis=-1)[..., -1]
