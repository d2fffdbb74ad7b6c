"""Per-frame decoding latency statistics."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..decoder.reference import DecoderResources
from ..timing import cycles_per_ns
from .channel import default_seed
from .frames import FrameSource

PERCENTILES = (50.0, 99.0, 99.9)
# latency frames come from their own streams, apart from FER batches
LATENCY_STREAM = 1 << 40
GEN_BATCH = 1024
MIN_TIMED_FRAMES = 1000


@dataclass(frozen=True)
class LatencyStats:
    average_us: float
    worst_us: float
    p50_us: float
    p99_us: float
    p999_us: float
    count: int

    @classmethod
    def from_samples(cls, samples_ns):
        us = np.asarray(samples_ns, dtype=float) / 1e3
        if us.size == 0:
            raise ValueError("no latency samples")
        p50, p99, p999 = np.percentile(us, PERCENTILES)
        return cls(float(us.mean()), float(us.max()), float(p50), float(p99), float(p999),
                   int(us.size))

    def line(self):
        return (f"lat_avg_us={self.average_us:.3f} lat_p50_us={self.p50_us:.3f} "
                f"lat_p99_us={self.p99_us:.3f} lat_p999_us={self.p999_us:.3f} "
                f"lat_worst_us={self.worst_us:.3f} samples={self.count}")


def latency_frames(resources, ebn0_db, frames, seed=None):
    """``frames`` seeded LLR frames for timing, generated up front."""
    seed = default_seed() if seed is None else int(seed)
    source = FrameSource(resources)
    sigma = source.sigma(ebn0_db)
    parts, done, index = [], 0, 0
    while done < frames:
        size = min(GEN_BATCH, frames - done)
        parts.append(source.batch(seed, LATENCY_STREAM + index, size, sigma).llrs)
        done += size
        index += 1
    n = resources.frozen_set.n
    return np.concatenate(parts) if parts else np.zeros((0, n))


def time_frames(decoder, llrs, warmup=100):
    """Nanoseconds spent decoding each frame after the first ``warmup``.

    Decoders with a compiled ``time_batch`` are timed around the decode call
    inside compiled code, so the figures exclude interpreter dispatch.  Other
    decoders are timed around ``decode_one`` with the monotonic clock.
    """
    llrs = np.ascontiguousarray(llrs, dtype=np.float64)
    rate = cycles_per_ns() if hasattr(decoder, "time_batch") else None
    if rate is not None:
        return decoder.time_batch(llrs)[warmup:] / rate
    for llr in llrs[:warmup]:
        decoder.decode_one(llr)
    timed = llrs[warmup:]
    samples = np.empty(timed.shape[0], dtype=np.int64)
    clock = time.perf_counter_ns
    decode = decoder.decode_one
    for i in range(timed.shape[0]):
        llr = timed[i]
        t0 = clock()
        decode(llr)
        samples[i] = clock() - t0
    return samples


def measure_latency(decoder, spec, ebn0_db, frames=10_000, warmup=1_000, seed=None,
                    resources=None):
    """Latency statistics of ``decoder`` over ``frames`` timed frames at ``ebn0_db``."""
    if frames < MIN_TIMED_FRAMES:
        raise ValueError(f"need at least {MIN_TIMED_FRAMES} timed frames, got {frames}")
    res = DecoderResources(spec) if resources is None else resources
    llrs = latency_frames(res, ebn0_db, frames + warmup, seed)
    return LatencyStats.from_samples(time_frames(decoder, llrs, warmup))
