"""Frame-error-rate Monte-Carlo over BPSK/AWGN."""
from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..decoder.reference import AsclDecoder, DecoderResources, ScDecoder, SclDecoder
from ..unroller.emit import DEFAULT_BACKEND, emitted_ascl_for
from .channel import default_seed
from .frames import FrameSource

DEFAULT_BATCH = 512
DEFAULT_MIN_ERRORS = 100
DEFAULT_MAX_FRAMES = 10**7
DECODER_KINDS = ("ascl", "scl", "sc")
REFERENCE_BACKEND = "reference"


class StopReason(enum.Enum):
    ERROR_TARGET = "ErrorTarget"
    FRAME_CAP = "FrameCap"
    TIME_CAP = "TimeCap"


@dataclass(frozen=True)
class StopRule:
    min_frame_errors: int = DEFAULT_MIN_ERRORS
    max_frames: int = DEFAULT_MAX_FRAMES
    max_time: float | None = None  # seconds

    def __post_init__(self):
        if self.min_frame_errors < 1 or self.max_frames < 1:
            raise ValueError("error target and frame cap must be positive")


@dataclass
class SimResult:
    frames: int
    frame_errors: int
    bit_errors: int
    ebn0_db: float
    stop_reason: StopReason
    k_info: int
    stage_counts: tuple = ()
    elapsed_s: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not 0 <= self.frame_errors <= self.frames:
            raise ValueError("frame errors must lie in [0, frames]")

    @property
    def fer(self):
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ber(self):
        bits = self.frames * self.k_info
        return self.bit_errors / bits if bits else 0.0

    @property
    def stderr(self):
        """Standard error of the FER estimate."""
        if not self.frames:
            return 0.0
        p = self.fer
        return math.sqrt(p * (1.0 - p) / self.frames)

    def line(self):
        stages = "/".join(str(c) for c in self.stage_counts)
        return (f"ebn0_db={self.ebn0_db:.3f} frames={self.frames} "
                f"frame_errors={self.frame_errors} fer={self.fer:.4e} ber={self.ber:.4e} "
                f"stderr={self.stderr:.2e} stages={stages} stop={self.stop_reason.value}")


@dataclass(frozen=True)
class DecoderChoice:
    """Which decoder a simulation runs: ``ascl`` (the spec's schedule),
    ``scl`` with a fixed list size, or ``sc``; emitted or reference."""

    kind: str = "ascl"
    list_size: int | None = None
    backend: str = DEFAULT_BACKEND

    def __post_init__(self):
        if self.kind not in DECODER_KINDS:
            raise ValueError(f"unknown decoder kind {self.kind!r}; choose from {DECODER_KINDS}")
        if self.kind == "scl" and not self.list_size:
            raise ValueError("scl needs a list size")

    def schedule(self, spec):
        """List sizes tried after SC; stage ``i`` runs ``schedule[i - 1]``."""
        return {"ascl": tuple(spec.list_schedule), "scl": (self.list_size,),
                "sc": ()}[self.kind]

    def build(self, resources):
        if self.backend == REFERENCE_BACKEND:
            return ReferenceBatch(resources, self)
        if self.kind == "ascl":
            return emitted_ascl_for(resources, backend=self.backend)
        if self.kind == "scl":
            return emitted_ascl_for(resources, (self.list_size,), sc_first=False,
                                    backend=self.backend)
        return emitted_ascl_for(resources, (), backend=self.backend)


class ReferenceBatch:
    """Tree-walking decoders behind the emitted decoders' batch interface."""

    def __init__(self, resources, choice):
        if choice.kind == "ascl":
            self.dec = AsclDecoder(resources)
        elif choice.kind == "scl":
            self.dec = SclDecoder(resources.list_plan, resources, choice.list_size,
                                  resources.pm_mode)
        else:
            self.dec = ScDecoder(resources.sc_plan, resources, resources.pm_mode)
        self.scl_only = choice.kind == "scl"

    def decode_batch(self, llrs):
        out = self.dec.decode_batch(llrs)
        stage = out.stage + 1 if self.scl_only else out.stage
        return out.codewords, out.crc_ok, stage, out.work

    def decode_one(self, llr):
        cw, ok, stage, work = self.decode_batch(np.asarray(llr)[None, :])
        return cw[0], bool(ok[0]), int(stage[0]), int(work[0])


@dataclass
class BatchCounts:
    """Per-frame outcome of one batch, in frame order."""
    frame_err: np.ndarray  # bool
    bit_err: np.ndarray    # int
    stage: np.ndarray      # int


class _Worker:
    def __init__(self, spec, choice, noiseless):
        self.res = DecoderResources(spec)
        self.source = FrameSource(self.res)
        self.decoder = choice.build(self.res)
        self.noiseless = noiseless
        self.info_pos = self.res.info_positions[:spec.k_info]

    def run(self, seed, index, frames, ebn0_db):
        sigma = 0.0 if self.noiseless else self.source.sigma(ebn0_db)
        batch = self.source.batch(seed, index, frames, sigma)
        cws, _, stages, _ = self.decoder.decode_batch(batch.llrs)
        wrong = cws[:, self.info_pos] != batch.messages
        return BatchCounts(wrong.any(axis=1), wrong.sum(axis=1), np.asarray(stages))


_WORKER = None


def _init_worker(spec, choice, noiseless):
    global _WORKER
    _WORKER = _Worker(spec, choice, noiseless)


def _run_batch(args):
    return _WORKER.run(*args)


def run_fer(spec, ebn0_db, stop=None, seed=None, decoder=None, workers=1,
            batch_size=DEFAULT_BATCH, noiseless=False):
    """Simulate ``spec`` at ``ebn0_db`` until a stop rule fires.

    Batch ``i`` always holds the same frames for a given seed and batch size,
    and batches are merged in index order, so the result does not depend on
    the number of workers.  When the error target is reached inside a batch
    the count stops at that frame.
    """
    stop = StopRule() if stop is None else stop
    seed = default_seed() if seed is None else int(seed)
    choice = DecoderChoice() if decoder is None else decoder
    n_stages = 1 + len(choice.schedule(spec))
    frames = errors = bit_errors = 0
    stage_counts = np.zeros(n_stages, dtype=np.int64)
    reason = StopReason.FRAME_CAP
    t0 = time.perf_counter()

    def jobs():
        index = 0
        while True:
            yield seed, index, batch_size, ebn0_db
            index += 1

    if workers > 1:
        pool = ProcessPoolExecutor(workers, initializer=_init_worker,
                                   initargs=(spec, choice, noiseless))
        results = _ordered(pool, jobs(), 2 * workers)
    else:
        pool = None
        worker = _Worker(spec, choice, noiseless)
        results = (worker.run(*job) for job in jobs())
    try:
        for counts in results:
            take = min(batch_size, stop.max_frames - frames)
            cum = errors + np.cumsum(counts.frame_err[:take])
            hit = np.flatnonzero(cum >= stop.min_frame_errors)
            if hit.size:
                take = int(hit[0]) + 1
            frames += take
            errors += int(np.count_nonzero(counts.frame_err[:take]))
            bit_errors += int(counts.bit_err[:take].sum())
            stage_counts += np.bincount(counts.stage[:take], minlength=n_stages)[:n_stages]
            if errors >= stop.min_frame_errors:
                reason = StopReason.ERROR_TARGET
                break
            if frames >= stop.max_frames:
                reason = StopReason.FRAME_CAP
                break
            if stop.max_time is not None and time.perf_counter() - t0 >= stop.max_time:
                reason = StopReason.TIME_CAP
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)
    return SimResult(frames, errors, bit_errors, float(ebn0_db), reason, spec.k_info,
                     tuple(int(c) for c in stage_counts), time.perf_counter() - t0)


def _ordered(pool, jobs, window):
    """Results of ``jobs`` in submission order with at most ``window`` in flight."""
    pending = []
    for job in jobs:
        pending.append(pool.submit(_run_batch, job))
        if len(pending) >= window:
            yield pending.pop(0).result()
