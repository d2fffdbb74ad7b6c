"""Execution of an :class:`UnrolledProgram` over flat scratch buffers."""
from __future__ import annotations

import numpy as np

from ..code_model import PmMode
from ..crc import CrcParams
from ..decoder.reference import DecodeOutcome
from . import runtime


def crc_arrays(prog):
    """CRC width, polynomial and bytewise table in the form the kernels take."""
    if prog.crc_width == 0:
        return 0, 0, np.zeros(256, dtype=np.int64)
    params = CrcParams(prog.crc_width, prog.crc_poly)
    return prog.crc_width, prog.crc_poly, np.asarray(params.table, dtype=np.int64)


class Scratch:
    """Per-call working memory sized for one program shape."""

    def __init__(self, n, list_size, cand_lanes):
        L = max(list_size, 1)
        self.sc_lv = np.zeros(2 * n - 1)
        self.sc_bits = np.zeros(n, dtype=np.uint8)
        self.tmp = np.zeros(n)
        self.lv = np.zeros((L, 2 * n))
        self.bits = np.zeros((L, n), dtype=np.uint8)
        self.pm = np.zeros(L)
        self.cand = np.zeros(max(cand_lanes, 2 * L))
        self.sel = np.zeros(max(cand_lanes, 2 * L), dtype=np.int64)
        self.slots = np.zeros(5 * L, dtype=np.int64)
        self.out = np.zeros(n, dtype=np.uint8)


class ProgramInterpreter:
    """Runs one program; instances are cheap and own their scratch."""

    def __init__(self, prog):
        self.prog = prog
        self.code = prog.encode()
        self.tables = prog.table_array()
        self.crc_w, self.crc_poly, self.crc_table = crc_arrays(prog)
        self.exact = prog.pm_mode is PmMode.EXACT
        self.scratch = Scratch(prog.n, prog.list_size, prog.cand_lanes)

    def run(self, llr):
        """Decode one frame; returns ``(codeword, crc_ok, work)``."""
        llr = np.ascontiguousarray(llr, dtype=np.float64)
        if llr.shape != (self.prog.n,):
            raise ValueError(f"expected {self.prog.n} LLRs, got shape {llr.shape}")
        s = self.scratch
        ok, work = runtime.interpret(
            self.code, self.prog.n, self.prog.list_size, self.exact, llr,
            s.sc_lv, s.sc_bits, s.tmp, s.lv, s.bits, s.pm, s.cand, s.sel,
            s.slots, self.tables, self.prog.info_positions, self.crc_w, self.crc_poly,
            self.crc_table, s.out)
        return s.out.copy(), bool(ok), int(work)

    def decode(self, llr):
        cw, ok, work = self.run(llr)
        info = cw[self.prog.info_positions][:self.prog.k_info].copy()
        return DecodeOutcome(info, ok, 0, work, cw)


def interpret_program(prog, llr):
    return ProgramInterpreter(prog).decode(llr)
