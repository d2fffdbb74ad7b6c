"""Flattening of a tree plan into a straight-line instruction program.

Buffer layout (lanes are element indices):

* LLR lanes ``[0, 2n - 1)``: level ``d`` (node size ``n / 2**d``) starts at
  ``2n - n / 2**(d-1)``; level 0 is the channel frame.  In list programs
  levels ``>= 1`` exist once per path while level 0 is shared.
* Bit lanes ``[0, n)``: a node covering source range ``[s, s + w)`` leaves its
  codeword in bit lanes ``[s, s + w)``; combining is in place.

A ``PATH_PRUNE`` carries ``copy_levels``, a bitmask of the LLR levels a
duplicated path still reads: the levels of ancestors whose left subtree holds
the leaf, since their ``G`` instruction is still ahead.  Every other level is
rewritten before it is read again, so it is not copied.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ..code_model import PmMode
from ..decoder.tree import NodeClass, node_codewords


class Op(enum.IntEnum):
    F = 0
    G = 1
    COMBINE = 2
    RATE0 = 3
    RATE1 = 4
    REP = 5
    SPC = 6
    PATH_FORK = 7
    PATH_PRUNE = 8
    CRC_SELECT = 9


LEAF_OPS = {NodeClass.RATE0: Op.RATE0, NodeClass.RATE1: Op.RATE1,
            NodeClass.REP: Op.REP, NodeClass.SPC: Op.SPC}
PATH_OPS = (Op.PATH_FORK, Op.PATH_PRUNE)

# candidate-word tables usable by list leaves: (size, n_candidates) <= (4, 16)
MAX_TABLE_WIDTH = 4
MAX_CANDIDATES = 16
REP_TABLE = -1


class GenerationError(ValueError):
    """The plan cannot be turned into a program within scratch bounds."""


@dataclass(frozen=True)
class Instr:
    op: Op
    width: int = 0
    llr_in: int = 0
    llr_out: int = 0
    bit_off: int = 0
    n_cand: int = 0
    table: int = 0
    list_size: int = 0
    copy_levels: int = 0

    FIELDS = ("op", "width", "llr_in", "llr_out", "bit_off", "n_cand", "table",
              "list_size", "copy_levels")

    def as_row(self):
        return [int(getattr(self, name)) for name in self.FIELDS]


@dataclass(frozen=True, eq=False)
class UnrolledProgram:
    n: int
    list_size: int
    pm_mode: PmMode
    instructions: tuple
    tables: tuple  # candidate codeword tables, each a (C, w) uint8 array
    info_positions: np.ndarray
    k_info: int
    crc_width: int
    crc_poly: int
    frozen: np.ndarray = field(repr=False)

    @property
    def llr_lanes(self):
        return 2 * self.n - 1

    @property
    def bit_lanes(self):
        return self.n

    @property
    def cand_lanes(self):
        c = max((t.shape[0] for t in self.tables), default=2)
        return self.list_size * max(c, 2)

    @property
    def slot_lanes(self):
        """Path bookkeeping words used by ``PATH_PRUNE`` (five blocks of L)."""
        return 5 * self.list_size if self.is_list else 0

    @property
    def is_list(self):
        return self.list_size > 1

    def node_ops(self):
        """Instructions that count as decoding work (no path bookkeeping)."""
        return sum(1 for ins in self.instructions
                   if ins.op not in PATH_OPS and ins.op is not Op.CRC_SELECT)

    def table_array(self):
        arr = np.zeros((max(1, len(self.tables)), MAX_CANDIDATES, MAX_TABLE_WIDTH),
                       dtype=np.uint8)
        for t, words in enumerate(self.tables):
            arr[t, :words.shape[0], :words.shape[1]] = words
        return arr

    def encode(self):
        return np.array([ins.as_row() for ins in self.instructions], dtype=np.int64)

    def manifest(self):
        counts = {}
        for ins in self.instructions:
            counts[ins.op.name] = counts.get(ins.op.name, 0) + 1
        return {
            "n_mother": self.n,
            "list_size": self.list_size,
            "pm_mode": self.pm_mode.value,
            "instruction_count": len(self.instructions),
            "node_ops": self.node_ops(),
            "llr_lanes": self.llr_lanes,
            "bit_lanes": self.bit_lanes,
            "path_copies": self.list_size,
            "cand_lanes": self.cand_lanes if self.is_list else 0,
            "slot_lanes": self.slot_lanes,
            "opcode_counts": counts,
        }

    def with_instruction(self, index, **changes):
        """Copy with one instruction altered (fault injection in tests)."""
        ins = list(self.instructions)
        ins[index] = replace(ins[index], **changes)
        return replace(self, instructions=tuple(ins))


def level_offset(n, depth):
    return 0 if depth == 0 else 2 * n - n // (1 << (depth - 1))


def level_lanes(n, depth):
    off = level_offset(n, depth)
    return off, off + n // (1 << depth)


class _Generator:
    def __init__(self, plan, list_size, pm_mode):
        self.plan = plan
        self.n = plan.n
        self.L = list_size
        self.exact = PmMode(pm_mode) is PmMode.EXACT
        self.out = []
        self.tables = []
        self._table_ids = {}

    def table_for(self, node):
        if node.kind is NodeClass.REP and node.size > 1:
            return REP_TABLE, 2
        frozen = self.plan.frozen[node.start:node.start + node.size]
        if node.size > MAX_TABLE_WIDTH:
            raise GenerationError(
                f"{node.kind.value} list node of size {node.size} exceeds the "
                f"candidate-table width {MAX_TABLE_WIDTH}")
        key = tuple(bool(x) for x in frozen)
        if key not in self._table_ids:
            self._table_ids[key] = len(self.tables)
            self.tables.append(node_codewords(frozen))
        t = self._table_ids[key]
        return t, self.tables[t].shape[0]

    def emit(self, node, pending=0):
        """``pending``: mask of ancestor levels whose ``G`` is still ahead."""
        n = self.n
        src = level_offset(n, node.depth)
        if node.kind is NodeClass.GENERIC:
            h = node.size // 2
            dst = level_offset(n, node.depth + 1)
            self.out.append(Instr(Op.F, h, src, dst))
            # level 0 is the shared channel frame and never copied
            self.emit(node.left, pending | (1 << node.depth if node.depth else 0))
            self.out.append(Instr(Op.G, h, src, dst, node.start))
            self.emit(node.right, pending)
            self.out.append(Instr(Op.COMBINE, h, bit_off=node.start))
            return
        op = LEAF_OPS[node.kind]
        if self.exact and node.size > 1:
            raise GenerationError("exact path metrics need an unpruned plan")
        if not self.L > 1 or node.kind is NodeClass.RATE0:
            self.out.append(Instr(op, node.size, src, bit_off=node.start))
            return
        table, n_cand = self.table_for(node)
        self.out.append(Instr(op, node.size, src, bit_off=node.start,
                              n_cand=n_cand, table=table))
        self.out.append(Instr(Op.PATH_FORK, node.size, n_cand=n_cand))
        self.out.append(Instr(Op.PATH_PRUNE, node.size, bit_off=node.start,
                              n_cand=n_cand, table=table, list_size=self.L,
                              copy_levels=pending))


def generate_program(plan, list_size=1, pm_mode=PmMode.APPROXIMATE, *,
                     info_positions=None, k_info=None, crc=None):
    """Depth-first linearization of ``plan`` for list size ``list_size``.

    ``list_size == 1`` yields a successive-cancellation program without any
    path bookkeeping.
    """
    if list_size < 1 or list_size & (list_size - 1):
        raise GenerationError(f"list size must be a power of two, got {list_size}")
    gen = _Generator(plan, list_size, pm_mode)
    gen.emit(plan.root)
    if info_positions is None:
        info_positions = np.flatnonzero(~plan.frozen)
    info_positions = np.asarray(info_positions, dtype=np.int64)
    k = info_positions.size if k_info is None else k_info
    gen.out.append(Instr(Op.CRC_SELECT, plan.n, list_size=list_size))
    prog = UnrolledProgram(
        n=plan.n, list_size=list_size, pm_mode=PmMode(pm_mode),
        instructions=tuple(gen.out), tables=tuple(gen.tables),
        info_positions=info_positions, k_info=k,
        crc_width=0 if crc is None else crc.width,
        crc_poly=0 if crc is None else crc.poly,
        frozen=plan.frozen.copy())
    check_program(prog)
    return prog


def program_for(resources, list_size):
    plan = resources.sc_plan if list_size == 1 else resources.list_plan
    return generate_program(plan, list_size, resources.pm_mode,
                            info_positions=resources.info_positions,
                            k_info=resources.k_info, crc=resources.crc)


def _reads_writes(ins, n):
    """LLR and bit lane intervals read and written by one instruction."""
    op, w = ins.op, ins.width
    llr_r, llr_w, bit_r, bit_w = [], [], [], []
    if op is Op.F:
        llr_r.append((ins.llr_in, ins.llr_in + 2 * w))
        llr_w.append((ins.llr_out, ins.llr_out + w))
    elif op is Op.G:
        llr_r.append((ins.llr_in, ins.llr_in + 2 * w))
        bit_r.append((ins.bit_off, ins.bit_off + w))
        llr_w.append((ins.llr_out, ins.llr_out + w))
    elif op is Op.COMBINE:
        bit_r.append((ins.bit_off, ins.bit_off + 2 * w))
        bit_w.append((ins.bit_off, ins.bit_off + w))
    elif op in (Op.RATE0, Op.RATE1, Op.REP, Op.SPC):
        llr_r.append((ins.llr_in, ins.llr_in + w))
        if ins.n_cand == 0:
            bit_w.append((ins.bit_off, ins.bit_off + w))
    elif op is Op.PATH_PRUNE:
        bit_w.append((ins.bit_off, ins.bit_off + w))
    elif op is Op.CRC_SELECT:
        bit_r.append((0, n))
    return llr_r, llr_w, bit_r, bit_w


def check_program(prog):
    """Bounds and def-before-use checks; raises :class:`GenerationError`."""
    n = prog.n
    llr_def = np.zeros(prog.llr_lanes, dtype=bool)
    llr_def[:n] = True
    bit_def = np.zeros(prog.bit_lanes, dtype=bool)
    pending_fork = False
    for idx, ins in enumerate(prog.instructions):
        if ins.width < 1:
            raise GenerationError(f"instruction {idx}: non-positive width")
        llr_r, llr_w, bit_r, bit_w = _reads_writes(ins, n)
        for lo, hi in llr_r + llr_w:
            if lo < 0 or hi > prog.llr_lanes:
                raise GenerationError(f"instruction {idx} ({ins.op.name}): LLR lanes "
                                      f"[{lo}, {hi}) outside [0, {prog.llr_lanes})")
        for lo, hi in bit_r + bit_w:
            if lo < 0 or hi > prog.bit_lanes:
                raise GenerationError(f"instruction {idx} ({ins.op.name}): bit lanes "
                                      f"[{lo}, {hi}) outside [0, {prog.bit_lanes})")
        for lo, hi in llr_r:
            if not llr_def[lo:hi].all():
                raise GenerationError(
                    f"instruction {idx} ({ins.op.name}) reads unwritten LLR lanes")
        for lo, hi in bit_r:
            if not bit_def[lo:hi].all():
                raise GenerationError(
                    f"instruction {idx} ({ins.op.name}) reads unwritten bit lanes")
        if ins.n_cand:
            if ins.n_cand > MAX_CANDIDATES or ins.n_cand * prog.list_size > prog.cand_lanes:
                raise GenerationError(f"instruction {idx}: candidate scratch overflow")
            if ins.table != REP_TABLE and not 0 <= ins.table < len(prog.tables):
                raise GenerationError(f"instruction {idx}: unknown candidate table")
        if ins.op is Op.PATH_FORK:
            pending_fork = True
        if ins.op is Op.PATH_PRUNE:
            if not pending_fork:
                raise GenerationError(f"instruction {idx}: prune without fork")
            if ins.copy_levels < 0 or ins.copy_levels & 1 or ins.copy_levels >= n:
                raise GenerationError(f"instruction {idx}: copy levels out of range")
            pending_fork = False
        if ins.op in PATH_OPS and not prog.is_list:
            raise GenerationError(f"instruction {idx}: path op in a list-size-1 program")
        for lo, hi in llr_w:
            llr_def[lo:hi] = True
        for lo, hi in bit_w:
            bit_def[lo:hi] = True
        if ins.op is Op.PATH_PRUNE:
            # a duplicated path holds only the copied levels and decided bits
            depth = 1
            while (n >> depth) >= 1:
                if not (ins.copy_levels >> depth) & 1:
                    lo, hi = level_lanes(n, depth)
                    llr_def[lo:hi] = False
                depth += 1
            bit_def[ins.bit_off + ins.width:] = False
    if not prog.instructions or prog.instructions[-1].op is not Op.CRC_SELECT:
        raise GenerationError("program must end with CRC_SELECT")
