"""Seeded batches of transmitted frames: message, CRC, encode, channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..crc import crc_attach_batch
from ..encoder import EncoderPlan, systematic_encode_batch
from .channel import FrameRng, bpsk_awgn_batch, ebn0_to_sigma


@dataclass
class FrameBatch:
    messages: np.ndarray   # (frames, k_info)
    codewords: np.ndarray  # (frames, n_tx)
    llrs: np.ndarray       # (frames, n_mother)


class FrameSource:
    """Frames for one code.  Batch ``i`` of seed ``s`` always draws from the
    Philox stream keyed by ``(s, i)``, whatever process produces it.
    """

    def __init__(self, resources):
        self.res = resources
        self.spec = resources.spec
        self.plan = EncoderPlan(resources.frozen_set, self.spec.n_tx)

    def sigma(self, ebn0_db):
        return ebn0_to_sigma(ebn0_db, self.spec.info_rate)

    def batch(self, seed, index, frames, sigma):
        rng = FrameRng(seed, index)
        msgs = rng.bits((frames, self.spec.k_info))
        cws = systematic_encode_batch(crc_attach_batch(msgs, self.res.crc), self.plan)
        llrs = bpsk_awgn_batch(cws, sigma, rng, self.spec.n_mother)
        return FrameBatch(msgs, cws, llrs)
