"""Cycle-counter timing usable from compiled code."""
import functools
import time

import numba
from llvmlite import ir
from numba import types
from numba.extending import intrinsic

CALIBRATION_S = 0.05


@intrinsic
def cycles(typingctx):
    """CPU cycle counter (``llvm.readcyclecounter``); 0 where unsupported."""
    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.IntType(64), [])
        fn = builder.module.declare_intrinsic("llvm.readcyclecounter", fnty=fnty)
        return builder.call(fn, [])
    return types.int64(), codegen


@numba.njit(cache=True)
def read_cycles():
    return cycles()


@functools.cache
def cycles_per_ns():
    """Cycle-counter rate against the monotonic clock; ``None`` if the
    counter does not run on this machine."""
    read_cycles()  # compile outside the window
    c0, t0 = read_cycles(), time.perf_counter_ns()
    while time.perf_counter_ns() - t0 < CALIBRATION_S * 1e9:
        pass
    c1, t1 = read_cycles(), time.perf_counter_ns()
    rate = (c1 - c0) / (t1 - t0)
    return rate if rate > 0 else None
