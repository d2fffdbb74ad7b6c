"""Design-space exploration: Eb/N0 at a target FER against ASCL latency."""
from __future__ import annotations

import csv
import itertools
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..code_model import Construction, doubling_schedule
from ..decoder.reference import DecoderResources
from ..unroller.emit import DEFAULT_BACKEND, emitted_ascl_for
from .fer import DecoderChoice, StopRule, run_fer
from .latency import measure_latency

CSV_FIELDS = ("k_info", "rate", "construction", "crc_width", "crc_poly", "L_max",
              "target_fer", "ebn0_db", "fer", "frames", "frame_errors", "lat_avg_us",
              "lat_p99_us", "lat_worst_us", "stop_reason")
RESOLUTION_DB = 0.05
# CRC candidates by width, as used by the contest codes
CRC_BY_WIDTH = {7: 0x65, 8: 0x9B, 10: 0x3D9, 11: 0x385, 12: 0xF13, 16: 0x8005}
UNREACHED = "Unreached"


@dataclass(frozen=True)
class Grid:
    constructions: tuple = (Construction.GA, Construction.FIVE_G)
    crcs: tuple = ((8, 0x9B), (12, 0xF13), (16, 0x8005))
    list_sizes: tuple = (8, 32, 64)

    def points(self):
        return list(itertools.product(self.constructions, self.crcs, self.list_sizes))


@dataclass(frozen=True)
class Budget:
    """Monte-Carlo effort per bisection step and for the latency figure."""
    min_frame_errors: int = 50
    frames_per_error_at_target: float = 2.0  # max_frames = this * min_errors / target
    latency_frames: int = 10_000
    latency_warmup: int = 1_000
    workers: int = 1

    def stop_rule(self, target_fer):
        cap = math.ceil(self.frames_per_error_at_target * self.min_frame_errors / target_fer)
        return StopRule(self.min_frame_errors, max(cap, self.min_frame_errors))


def point_spec(base, construction, crc, list_size):
    width, poly = crc
    return base.replace(construction=construction, crc_size=width, crc_poly=poly,
                        list_schedule=doubling_schedule(list_size))


def find_ebn0(spec, target_fer, lo_db, hi_db, budget, seed, backend=DEFAULT_BACKEND):
    """Smallest Eb/N0 on the ``RESOLUTION_DB`` grid in ``[lo_db, hi_db]`` whose
    measured FER is at most ``target_fer``, by bisection.

    Returns ``(ebn0_db, SimResult)`` for the chosen point, or ``(None, result
    at hi_db)`` when even ``hi_db`` misses the target.
    """
    steps = int(round((hi_db - lo_db) / RESOLUTION_DB))
    stop = budget.stop_rule(target_fer)
    choice = DecoderChoice(backend=backend)
    cache = {}

    def measure(i):
        if i not in cache:
            ebn0 = round(lo_db + i * RESOLUTION_DB, 6)
            cache[i] = run_fer(spec, ebn0, stop, seed, choice, workers=budget.workers)
        return cache[i]

    if measure(steps).fer > target_fer:
        return None, measure(steps)
    lo, hi = -1, steps  # fer(lo) > target (or below range), fer(hi) <= target
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if measure(mid).fer <= target_fer:
            hi = mid
        else:
            lo = mid
    return measure(hi).ebn0_db, measure(hi)


def run_isolated(fn, *args):
    """``fn(*args)`` in a fresh child process.

    Compiled decoders stay resident for the life of the process that loaded
    them, so a sweep over many codes grows without bound; a child returns
    that memory when it exits.  ``fn`` and its result must be picklable.
    """
    method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
    with ProcessPoolExecutor(1, mp_context=multiprocessing.get_context(method)) as pool:
        return pool.submit(fn, *args).result()


def explore(base, grid=None, target_fer=1e-3, ebn0_range=(0.0, 5.0), budget=None,
            seed=None, backend=DEFAULT_BACKEND, progress=None, isolate=False):
    """One row per grid point; a failing point records its error and the run
    continues.  With ``isolate`` each point runs in its own child process."""
    grid = Grid() if grid is None else grid
    budget = Budget() if budget is None else budget
    rows = []
    for construction, crc, L in grid.points():
        args = (base, construction, crc, L, target_fer, tuple(ebn0_range), budget, seed,
                backend)
        if isolate:
            try:
                row = run_isolated(_point_row, *args)
            except Exception as exc:  # the child itself died
                row = _empty_row(base, construction, crc, L, target_fer)
                row["stop_reason"] = f"Error: {type(exc).__name__}: {exc}"
        else:
            row = _point_row(*args)
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def _empty_row(base, construction, crc, L, target_fer):
    return {"k_info": base.k_info, "rate": str(base.rate),
            "construction": Construction(construction).value, "crc_width": crc[0],
            "crc_poly": f"0x{crc[1]:X}", "L_max": L, "target_fer": target_fer,
            "ebn0_db": "", "fer": "", "frames": "", "frame_errors": "",
            "lat_avg_us": "", "lat_p99_us": "", "lat_worst_us": "", "stop_reason": ""}


def _point_row(base, construction, crc, L, target_fer, ebn0_range, budget, seed, backend):
    row = _empty_row(base, construction, crc, L, target_fer)
    try:
        spec = point_spec(base, construction, crc, L)
        ebn0, result = find_ebn0(spec, target_fer, *ebn0_range, budget, seed, backend)
        row.update(fer=f"{result.fer:.6g}", frames=result.frames,
                   frame_errors=result.frame_errors)
        if ebn0 is None:
            row["stop_reason"] = UNREACHED
        else:
            res = DecoderResources(spec)
            stats = measure_latency(emitted_ascl_for(res, backend=backend), spec, ebn0,
                                    budget.latency_frames, budget.latency_warmup, seed,
                                    resources=res)
            row.update(ebn0_db=f"{ebn0:.2f}", lat_avg_us=f"{stats.average_us:.3f}",
                       lat_p99_us=f"{stats.p99_us:.3f}", lat_worst_us=f"{stats.worst_us:.3f}",
                       stop_reason=result.stop_reason.value)
    except Exception as exc:  # recorded in the row; the sweep goes on
        row["stop_reason"] = f"Error: {type(exc).__name__}: {exc}"
    return row


def write_csv(rows, path_or_file):
    if hasattr(path_or_file, "write"):
        _write(rows, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(rows, fh)


def _write(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
    writer.writeheader()
    writer.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _objectives(row):
    try:
        return float(row["ebn0_db"]), float(row["lat_avg_us"])
    except (TypeError, ValueError):
        return None


def dominated_by(row, rows):
    """Rows that Pareto-dominate ``row`` in (Eb/N0, average latency)."""
    mine = _objectives(row)
    if mine is None:
        return []
    out = []
    for other in rows:
        theirs = _objectives(other)
        if other is row or theirs is None:
            continue
        if theirs[0] <= mine[0] and theirs[1] <= mine[1] and theirs != mine:
            out.append(other)
    return out


def pareto_front(rows):
    return [r for r in rows if _objectives(r) is not None and not dominated_by(r, rows)]


def find_row(rows, construction, crc_poly, list_size):
    construction = Construction(construction).value
    for r in rows:
        if (r["construction"] == construction and int(str(r["crc_poly"]), 0) == crc_poly
                and int(r["L_max"]) == list_size):
            return r
    raise KeyError(f"no row for {construction}, 0x{crc_poly:X}, L={list_size}")
