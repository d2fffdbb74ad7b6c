"""BPSK over AWGN with a portable, seedable noise source."""
from __future__ import annotations

import math
import os

import numpy as np

from ..decoder.kernels import SATURATION_LLR

DEFAULT_SEED = 20250901
SEED_ENV = "POLAR_LAB_SEED"


def default_seed():
    raw = os.environ.get(SEED_ENV)
    return int(raw, 0) if raw else DEFAULT_SEED


def ebn0_to_sigma(ebn0_db, rate_info):
    rate_info = float(rate_info)
    if rate_info <= 0:
        raise ValueError(f"rate must be positive, got {rate_info}")
    return math.sqrt(1.0 / (2.0 * rate_info * 10.0 ** (ebn0_db / 10.0)))


class FrameRng:
    """Philox counter-based stream keyed by ``(seed, stream)``.

    Gaussians come from the Box-Muller transform over the stream's uniforms,
    so a given key yields the same samples on every platform.
    """

    def __init__(self, seed, stream=0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed & (2**64 - 1), self.stream & (2**64 - 1)], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def bits(self, shape):
        return self.gen.integers(0, 2, size=shape, dtype=np.uint8)

    def gaussian(self, shape):
        n = int(np.prod(shape))
        half = (n + 1) // 2
        u1 = 1.0 - self.gen.random(half)  # (0, 1]
        u2 = self.gen.random(half)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * half)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape)


def bpsk_awgn(codeword, sigma, rng, n_mother=None):
    """Channel LLRs for one frame, padded to ``n_mother`` with known zeros."""
    codeword = np.asarray(codeword, dtype=np.uint8)
    return bpsk_awgn_batch(codeword[None, :], sigma, rng, n_mother)[0]


def bpsk_awgn_batch(codewords, sigma, rng, n_mother=None):
    codewords = np.asarray(codewords, dtype=np.uint8)
    frames, n_tx = codewords.shape
    n_mother = n_tx if n_mother is None else n_mother
    llr = np.full((frames, n_mother), SATURATION_LLR)
    symbols = 1.0 - 2.0 * codewords
    if sigma > 0:
        y = symbols + sigma * rng.gaussian((frames, n_tx))
        llr[:, :n_tx] = 2.0 * y / (sigma * sigma)
    else:
        llr[:, :n_tx] = symbols * SATURATION_LLR
    return llr
