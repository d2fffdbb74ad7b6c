"""Rendering of unrolled programs as straight-line source, plus loading.

The default backend renders numba-compiled Python: one flat function per
program with every offset, width and list size written as a literal, calling
the kernels in :mod:`polar_lab.unroller.runtime`.  The ``python`` backend
renders the same text without compilation, which is handy for debugging.
"""
from __future__ import annotations

import hashlib
import importlib.util
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..code_model import PmMode
from .interpreter import Scratch, crc_arrays
from .program import Op, program_for

BACKENDS = ("numba", "python")
DEFAULT_BACKEND = "numba"
CACHE_ENV = "POLAR_LAB_CACHE"


class UnknownBackendError(ValueError):
    pass


def _check_backend(backend):
    if backend not in BACKENDS:
        raise UnknownBackendError(
            f"unknown backend {backend!r}; registered: {', '.join(BACKENDS)}")


def _decorator(backend, flat=False):
    if backend != "numba":
        return []
    # A flat list decoder is a long run of calls into kernels that are
    # compiled and optimized on their own; skipping LLVM passes over it (which
    # also keeps it from being inlined into the schedule loop) cuts compile
    # time several fold for a small runtime cost.  The schedule loop and batch
    # driver call it and are compiled normally, since callers of such a
    # function stay cacheable.
    if flat:
        return ["@numba.njit(cache=True, _dbg_optnone=True)"]
    return ["@numba.njit(cache=True)"]


def _array_literal(arr, dtype, per_line=16):
    flat = [str(int(v)) for v in np.asarray(arr).ravel()]
    rows = [", ".join(flat[i:i + per_line]) for i in range(0, len(flat), per_line)]
    body = ",\n    ".join(rows)
    return f"np.array((\n    {body},\n), dtype=np.{dtype})"


def function_name(prog):
    return "decode_sc" if prog.list_size == 1 else f"decode_l{prog.list_size}"


SC_ARGS = "llr_in, lv, bits, tmp, out, info_pos, crc_table"
LIST_ARGS = "llr_in, lv, bits, pm, cand, sel, slots, out, info_pos, crc_table, tables"


def _sc_body(prog, exact):
    n = prog.n
    lines = [f"rt.sc_load(lv, llr_in, {n})"]
    for ins in prog.instructions:
        op, w, src, dst, boff = ins.op, ins.width, ins.llr_in, ins.llr_out, ins.bit_off
        if op is Op.F:
            lines.append(f"rt.sc_f(lv, {src}, {dst}, {w}, {exact})")
        elif op is Op.G:
            lines.append(f"rt.sc_g(lv, bits, {src}, {dst}, {boff}, {w})")
        elif op is Op.COMBINE:
            lines.append(f"rt.sc_combine(bits, {boff}, {w})")
        elif op is Op.RATE0:
            lines.append(f"rt.sc_rate0(bits, {boff}, {w})")
        elif op is Op.RATE1:
            lines.append(f"rt.sc_rate1(lv, bits, {src}, {boff}, {w})")
        elif op is Op.REP:
            lines.append(f"rt.sc_rep(lv, bits, tmp, {src}, {boff}, {w})")
        elif op is Op.SPC:
            lines.append(f"rt.sc_spc(lv, bits, {src}, {boff}, {w})")
        elif op is Op.CRC_SELECT:
            lines.append(f"return rt.sc_select(bits, {n}, info_pos, CRC_W, CRC_POLY, "
                         "crc_table, out)")
    return lines


def _list_body(prog, exact):
    n, L = prog.n, prog.list_size
    lines = [f"npath = rt.ls_start(pm, slots, {L})"]
    for ins in prog.instructions:
        op, w, src, dst, boff = ins.op, ins.width, ins.llr_in, ins.llr_out, ins.bit_off
        if op is Op.F:
            lines.append(f"rt.ls_f(llr_in, lv, slots, npath, {src}, {dst}, {w}, {n}, {exact})")
        elif op is Op.G:
            lines.append(f"rt.ls_g(llr_in, lv, bits, slots, npath, {src}, {dst}, {boff}, "
                         f"{w}, {n})")
        elif op is Op.COMBINE:
            lines.append(f"rt.ls_combine(bits, slots, npath, {boff}, {w})")
        elif op is Op.RATE0:
            lines.append(f"rt.ls_rate0(llr_in, lv, bits, pm, slots, npath, {src}, {boff}, "
                         f"{w}, {n}, {exact})")
        elif op in (Op.RATE1, Op.REP, Op.SPC):
            lines.append(f"rt.ls_leaf(llr_in, lv, slots, npath, {src}, {w}, {n}, tables, "
                         f"{ins.table}, {ins.n_cand}, cand, {exact})")
        elif op is Op.PATH_FORK:
            lines.append(f"rt.ls_fork(pm, npath, {ins.n_cand}, cand)")
        elif op is Op.PATH_PRUNE:
            lines.append(f"npath = rt.ls_prune(lv, bits, pm, cand, sel, slots, npath, "
                         f"{ins.n_cand}, {ins.list_size}, {n}, {ins.copy_levels:#x}, "
                         f"{boff}, {w}, tables, {ins.table})")
        elif op is Op.CRC_SELECT:
            lines.append(f"return rt.ls_select(bits, pm, slots, npath, {n}, info_pos, "
                         "CRC_W, CRC_POLY, crc_table, out)")
    return lines


def _function(prog, backend):
    name = function_name(prog)
    exact = prog.pm_mode is PmMode.EXACT
    out = [f"# list size {prog.list_size}: {len(prog.instructions)} instructions, "
           f"{prog.node_ops()} node ops",
           f"WORK_{name[len('decode_'):].upper()} = {prog.node_ops()}", "", ""]
    # the SC decoder is short enough to optimize in full
    out += _decorator(backend, flat=prog.list_size > 1)
    if prog.list_size == 1:
        out.append(f"def {name}({SC_ARGS}):")
        body = _sc_body(prog, exact)
    else:
        out.append(f"def {name}({LIST_ARGS}):")
        body = _list_body(prog, exact)
    out += ["    " + line for line in body]
    return out


def _header(prog, tables):
    crc_w, crc_poly, crc_table = crc_arrays(prog)
    return [
        '"""Unrolled polar decoders for one frozen set (generated file)."""',
        "import numba",
        "import numpy as np",
        "",
        "from polar_lab.unroller import runtime as rt",
        "",
        "# Arrays are passed to the decoders as arguments rather than read as",
        "# globals, which keeps the compiled functions cacheable.",
        f"N = {prog.n}",
        f"K_INFO = {prog.k_info}",
        f"INFO_POS = {_array_literal(prog.info_positions, 'int64')}",
        f"CRC_W = {crc_w}",
        f"CRC_POLY = {crc_poly:#x}",
        f"CRC_TABLE = {_array_literal(crc_table, 'int64', per_line=8)}",
        f"TABLES = {_array_literal(tables, 'uint8')}.reshape{tables.shape}",
        "",
    ]


def _check_compatible(programs):
    base = programs[0]
    for p in programs[1:]:
        if (p.n != base.n or p.crc_width != base.crc_width or p.crc_poly != base.crc_poly
                or p.k_info != base.k_info
                or not np.array_equal(p.info_positions, base.info_positions)):
            raise ValueError("programs in one module must share the code")
    names = [function_name(p) for p in programs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate list sizes in one module")
    lists = [p for p in programs if p.is_list]
    for p in lists[1:]:
        if not np.array_equal(p.table_array(), lists[0].table_array()):
            raise ValueError("list programs in one module must share candidate tables")
    return lists[0].table_array() if lists else base.table_array()


def emit_source(prog, backend=DEFAULT_BACKEND):
    """Source text holding one flat decoder function for ``prog``."""
    _check_backend(backend)
    lines = _header(prog, prog.table_array()) + [""] + _function(prog, backend)
    return "\n".join(lines) + "\n"


def emit_ascl_module(sc_prog, list_progs, backend=DEFAULT_BACKEND, sc_first=True):
    """SC and per-list-size decoders composed behind the escalation schedule.

    The schedule loop itself stays data-dependent control flow; each stage
    calls the flat function of its list size.  With ``sc_first=False`` the SC
    stage is skipped, so a single list size gives a plain SCL decoder.  A
    batch entry point decodes a matrix of frames with one set of scratch
    buffers.
    """
    _check_backend(backend)
    if sc_prog.list_size != 1:
        raise ValueError("first program must be the SC program")
    programs = [sc_prog] + list(list_progs)
    tables = _check_compatible(programs)
    lines = _header(sc_prog, tables)
    for prog in programs:
        lines += [""] + _function(prog, backend)
    l_max = max((p.list_size for p in list_progs), default=1)
    cand = max((p.cand_lanes for p in list_progs), default=2)
    lines += ["", f"L_MAX = {l_max}", f"CAND_LANES = {cand}",
              f"SCHEDULE = {tuple(p.list_size for p in list_progs)!r}", "", ""]
    lines += _decorator(backend)
    lines += ["def decode_ascl(llr_in, sc_lv, sc_bits, tmp, lv, bits, pm, cand, sel, slots, "
              "out, info_pos, crc_table, tables):",
              '    """Returns (crc_ok, stage, work); stage 0 is SC."""']
    if sc_first:
        lines += ["    work = WORK_SC",
                  "    ok = decode_sc(llr_in, sc_lv, sc_bits, tmp, out, info_pos, crc_table)"]
        if list_progs:
            lines += ["    if ok:", "        return True, 0, work"]
        else:
            lines += ["    return ok, 0, work"]
    else:
        if not list_progs:
            raise ValueError("a module without the SC stage needs a list size")
        lines += ["    work = 0"]
    for stage, prog in enumerate(list_progs, 1):
        L = prog.list_size
        lines += [f"    work += WORK_L{L}",
                  f"    if decode_l{L}({LIST_ARGS}):",
                  f"        return True, {stage}, work"]
    if list_progs:
        lines += [f"    return False, {len(list_progs)}, work"]
    lines += ["", ""]
    lines += _decorator(backend)
    lines += ["def decode_batch(llrs, codewords, crc_ok, stages, works, info_pos, crc_table, "
              "tables):",
              "    sc_lv = np.zeros(2 * N - 1)",
              "    sc_bits = np.zeros(N, dtype=np.uint8)",
              "    tmp = np.zeros(N)",
              "    lv = np.zeros((L_MAX, 2 * N))",
              "    bits = np.zeros((L_MAX, N), dtype=np.uint8)",
              "    pm = np.zeros(L_MAX)",
              "    cand = np.zeros(max(CAND_LANES, 2 * L_MAX))",
              "    sel = np.zeros(max(CAND_LANES, 2 * L_MAX), dtype=np.int64)",
              "    slots = np.zeros(5 * L_MAX, dtype=np.int64)",
              "    for f in range(llrs.shape[0]):",
              "        ok, stage, work = decode_ascl(llrs[f], sc_lv, sc_bits, tmp, lv, bits, "
              "pm, cand, sel, slots, codewords[f], info_pos, crc_table, tables)",
              "        crc_ok[f] = ok",
              "        stages[f] = stage",
              "        works[f] = work"]
    lines += ["", ""]
    lines += _decorator(backend)
    lines += ["def time_batch(llrs, cycles, info_pos, crc_table, tables):",
              '    """Cycle-counter ticks spent in each decode_ascl call."""',
              "    sc_lv = np.zeros(2 * N - 1)",
              "    sc_bits = np.zeros(N, dtype=np.uint8)",
              "    tmp = np.zeros(N)",
              "    lv = np.zeros((L_MAX, 2 * N))",
              "    bits = np.zeros((L_MAX, N), dtype=np.uint8)",
              "    pm = np.zeros(L_MAX)",
              "    cand = np.zeros(max(CAND_LANES, 2 * L_MAX))",
              "    sel = np.zeros(max(CAND_LANES, 2 * L_MAX), dtype=np.int64)",
              "    slots = np.zeros(5 * L_MAX, dtype=np.int64)",
              "    out = np.zeros(N, dtype=np.uint8)",
              "    for f in range(llrs.shape[0]):",
              "        t0 = rt.read_cycles()",
              "        decode_ascl(llrs[f], sc_lv, sc_bits, tmp, lv, bits, pm, cand, sel, slots, "
              "out, info_pos, crc_table, tables)",
              "        cycles[f] = rt.read_cycles() - t0"]
    return "\n".join(lines) + "\n"


# -- file cache and loading --------------------------------------------------

def cache_dir():
    raw = os.environ.get(CACHE_ENV)
    path = Path(raw) if raw else Path.home() / ".cache" / "polar_lab"
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_source(text, name_hint="polar_unrolled"):
    """Write ``text`` to the cache (content-addressed) and import it.

    Content addressing keeps numba's on-disk cache valid across processes.
    """
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    mod_name = f"{name_hint}_{digest}"
    if mod_name in sys.modules:
        return sys.modules[mod_name]
    path = cache_dir() / f"{mod_name}.py"
    if not path.exists() or path.read_text() != text:
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        tmp.write_text(text)
        os.replace(tmp, path)
    spec = importlib.util.spec_from_file_location(mod_name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[mod_name] = module
    spec.loader.exec_module(module)
    return module


def write_emitted(text, path, manifest):
    """Write source to ``path`` and its manifest next to it as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    mpath = path.with_suffix(".manifest.json")
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


class EmittedDecoder:
    """Single-program decoder backed by emitted source."""

    def __init__(self, prog, backend=DEFAULT_BACKEND):
        self.prog = prog
        self.module = load_source(emit_source(prog, backend),
                                  f"polar_{backend}_n{prog.n}_l{prog.list_size}")
        self.fn = getattr(self.module, function_name(prog))
        self.scratch = Scratch(prog.n, prog.list_size, prog.cand_lanes)

    def run(self, llr):
        """Decode one frame; returns ``(codeword, crc_ok)``."""
        llr = np.ascontiguousarray(llr, dtype=np.float64)
        s, m = self.scratch, self.module
        if self.prog.list_size == 1:
            ok = self.fn(llr, s.sc_lv, s.sc_bits, s.tmp, s.out, m.INFO_POS, m.CRC_TABLE)
        else:
            ok = self.fn(llr, s.lv, s.bits, s.pm, s.cand, s.sel, s.slots, s.out,
                         m.INFO_POS, m.CRC_TABLE, m.TABLES)
        return s.out.copy(), bool(ok)


class EmittedAscl:
    """ASCL decoder built from emitted SC and SCL programs."""

    def __init__(self, sc_prog, list_progs, backend=DEFAULT_BACKEND, sc_first=True):
        self.sc_prog = sc_prog
        self.list_progs = tuple(list_progs)
        self.sc_first = sc_first
        self.schedule = tuple(p.list_size for p in self.list_progs)
        self.text = emit_ascl_module(sc_prog, self.list_progs, backend, sc_first)
        self.module = load_source(self.text, f"polar_ascl_{backend}_n{sc_prog.n}")
        self.n = sc_prog.n
        self.scratch = Scratch(self.n, self.module.L_MAX, self.module.CAND_LANES)

    def decode_one(self, llr):
        """Returns ``(codeword, crc_ok, stage, work)``; the codeword is a view."""
        s, m = self.scratch, self.module
        ok, stage, work = m.decode_ascl(
            llr, s.sc_lv, s.sc_bits, s.tmp, s.lv, s.bits, s.pm, s.cand, s.sel, s.slots,
            s.out, m.INFO_POS, m.CRC_TABLE, m.TABLES)
        return s.out, ok, stage, work

    def decode_batch(self, llrs):
        llrs = np.ascontiguousarray(llrs, dtype=np.float64)
        frames = llrs.shape[0]
        cws = np.zeros((frames, self.n), dtype=np.uint8)
        ok = np.zeros(frames, dtype=np.bool_)
        stages = np.zeros(frames, dtype=np.int64)
        works = np.zeros(frames, dtype=np.int64)
        m = self.module
        m.decode_batch(llrs, cws, ok, stages, works, m.INFO_POS, m.CRC_TABLE, m.TABLES)
        return cws, ok, stages, works


    def time_batch(self, llrs):
        """Cycle-counter ticks of each frame's decode, timed in compiled code."""
        llrs = np.ascontiguousarray(llrs, dtype=np.float64)
        ticks = np.zeros(llrs.shape[0], dtype=np.int64)
        m = self.module
        m.time_batch(llrs, ticks, m.INFO_POS, m.CRC_TABLE, m.TABLES)
        return ticks


def emitted_ascl_for(resources, schedule=None, sc_first=True, backend=DEFAULT_BACKEND):
    """Emitted decoder for a code: ASCL by default, SCL(L) with
    ``schedule=(L,)`` and ``sc_first=False``, SC alone with ``schedule=()``.
    """
    schedule = tuple(resources.spec.list_schedule if schedule is None else schedule)
    sc = program_for(resources, 1)
    lists = [program_for(resources, L) for L in schedule]
    return EmittedAscl(sc, lists, backend, sc_first)
