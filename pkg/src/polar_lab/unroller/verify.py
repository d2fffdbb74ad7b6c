"""Paired decoding of an unrolled program against the tree-walking reference."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..decoder.reference import ScDecoder, SclDecoder
from ..sim.frames import FrameSource
from .interpreter import ProgramInterpreter

VERIFY_BATCH = 256


@dataclass
class EquivalenceReport:
    frames: int
    mismatches: int = 0
    first_mismatch: int | None = None
    details: list = field(default_factory=list)  # (frame, reason) for the first few

    @property
    def passed(self):
        return self.mismatches == 0

    def summary(self):
        text = f"{self.frames} frames, {self.mismatches} mismatches"
        if self.first_mismatch is not None:
            text += f" (first at frame {self.first_mismatch})"
        return text


def reference_for(prog, resources, plan=None):
    """Tree-walking decoder matching ``prog``'s list size and plan."""
    if plan is None:
        plan = resources.sc_plan if prog.list_size == 1 else resources.list_plan
    if prog.list_size == 1:
        return ScDecoder(plan, resources, prog.pm_mode)
    return SclDecoder(plan, resources, prog.list_size, prog.pm_mode)


def verify_equivalence(prog, resources, n_frames, seed, ebn0_db=None, plan=None,
                       candidate=None, max_details=5):
    """Decode ``n_frames`` seeded noisy frames with both decoders and compare
    codeword, CRC verdict and work count.

    ``candidate`` defaults to the program interpreter; any object with a
    ``run(llr)`` method returning ``(codeword, crc_ok, ...)`` can be checked
    the same way.  Frames are drawn at ``ebn0_db`` (default: the spec's design
    point, else 2 dB).
    """
    report = EquivalenceReport(frames=int(n_frames))
    if n_frames <= 0:
        return report
    ref = reference_for(prog, resources, plan)
    cand = ProgramInterpreter(prog) if candidate is None else candidate
    spec = resources.spec
    if ebn0_db is None:
        ebn0_db = spec.design_snr_db if spec.design_snr_db is not None else 2.0
    source = FrameSource(resources)
    sigma = source.sigma(ebn0_db)
    done = 0
    batch_index = 0
    while done < n_frames:
        size = min(VERIFY_BATCH, n_frames - done)
        llrs = source.batch(seed, batch_index, size, sigma).llrs
        want = ref.decode_batch(llrs)
        for i, llr in enumerate(llrs):
            got = cand.run(llr)
            reason = None
            if not np.array_equal(want.codewords[i], got[0]):
                reason = "codeword"
            elif bool(want.crc_ok[i]) != bool(got[1]):
                reason = "crc verdict"
            elif len(got) > 2 and want.work[i] != got[2]:
                reason = "work count"
            if reason is not None:
                frame = done + i
                report.mismatches += 1
                if report.first_mismatch is None:
                    report.first_mismatch = frame
                if len(report.details) < max_details:
                    report.details.append((frame, reason))
        done += size
        batch_index += 1
    return report
