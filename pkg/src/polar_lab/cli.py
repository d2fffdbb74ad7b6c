"""Command-line entry point: ``polar-lab <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .code_model import Construction, SpecError, load_spec, shortened_positions
from .decoder.kernels import SATURATION_LLR
from .decoder.reference import DecoderResources
from .estimators import PolarDecoder, PolarEncoder
from .sim.channel import default_seed
from .sim.explore import CRC_BY_WIDTH, Budget, Grid, explore, write_csv
from .sim.fer import DECODER_KINDS, REFERENCE_BACKEND, DecoderChoice, StopRule, run_fer
from .unroller.emit import BACKENDS, DEFAULT_BACKEND, emit_ascl_module, write_emitted
from .unroller.program import program_for
from .unroller.verify import verify_equivalence


class CliError(Exception):
    pass


# -- file formats --------------------------------------------------------------
# bit files: one frame per line written as 0/1 characters
# LLR files: one frame per line of whitespace-separated reals

def read_bits(path, width=None):
    """0/1 rows; with ``width``, rows written as ``0x...`` are read as hex
    numbers spelling ``width`` bits most significant first."""
    text = sys.stdin.read() if path in (None, "-") else Path(path).read_text()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = "".join(line.split())
        if not line:
            continue
        if line.lower().startswith("0x") and width is not None:
            try:
                value = int(line, 16)
            except ValueError:
                raise CliError(f"line {lineno}: bad hex row {line!r}") from None
            if value >> width:
                raise CliError(f"line {lineno}: hex row does not fit in {width} bits")
            rows.append([(value >> (width - 1 - i)) & 1 for i in range(width)])
            continue
        if set(line) - {"0", "1"}:
            raise CliError(f"line {lineno}: bit rows may only contain 0 and 1")
        rows.append([int(c) for c in line])
    return rows


def read_llrs(path):
    text = sys.stdin.read() if path in (None, "-") else Path(path).read_text()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.split()])
        except ValueError as exc:
            raise CliError(f"line {lineno}: {exc}") from None
    return rows


def format_bits(row):
    return "".join(str(int(b)) for b in row)


def _matrix(rows, width, what):
    for i, r in enumerate(rows, 1):
        if len(r) != width:
            raise CliError(f"frame {i}: expected {width} {what}, got {len(r)}")
    return np.array(rows).reshape(len(rows), width)


# -- subcommands ---------------------------------------------------------------

def cmd_construct(args, out):
    spec = args.spec_obj
    res = DecoderResources(spec)
    fs = res.frozen_set
    short = shortened_positions(spec.n_mother, spec.n_tx)
    frozen = np.flatnonzero(fs.frozen)
    print(f"k_info={spec.k_info} crc_size={spec.crc_size} crc_poly=0x{spec.crc_poly:X} "
          f"construction={spec.construction.value} n_mother={spec.n_mother} "
          f"n_tx={spec.n_tx}", file=out)
    print(f"shortened={len(short)} frozen={frozen.size} info={fs.info_count}", file=out)
    print("frozen_positions: " + " ".join(str(i) for i in frozen), file=out)
    print("info_positions: " + " ".join(str(i) for i in fs.info_positions), file=out)
    return 0


def cmd_encode(args, out):
    spec = args.spec_obj
    if args.random is not None:
        rng = np.random.Generator(np.random.Philox(args.seed))
        msgs = rng.integers(0, 2, size=(args.random, spec.k_info), dtype=np.uint8)
    else:
        msgs = _matrix(read_bits(args.input, spec.k_info), spec.k_info, "message bits")
    cws = PolarEncoder(spec).fit().transform(msgs)
    for cw in cws:
        print(format_bits(cw), file=out)
    return 0


def cmd_decode(args, out):
    spec = args.spec_obj
    rows = read_llrs(args.input)
    for i, r in enumerate(rows, 1):
        if len(r) not in (spec.n_tx, spec.n_mother):
            raise CliError(f"frame {i}: expected {spec.n_tx} or {spec.n_mother} LLRs, "
                           f"got {len(r)}")
    llrs = np.full((len(rows), spec.n_mother), SATURATION_LLR)
    for i, r in enumerate(rows):
        llrs[i, :len(r)] = r
    dec = PolarDecoder(spec, *_decoder_args(args)).fit()
    cws, ok, stages, _ = dec.decode(llrs) if rows else ([], [], [], [])
    info = dec.resources_.info_positions[:spec.k_info]
    for cw, good, stage in zip(cws, ok, stages):
        print(f"{format_bits(np.asarray(cw)[info])} crc={'ok' if good else 'fail'} "
              f"stage={int(stage)}", file=out)
    return 0


def _decoder_args(args):
    if args.list:
        return "scl", args.list, args.backend
    return args.decoder, None, args.backend


def cmd_sim(args, out):
    spec = args.spec_obj
    if args.ebn0 is None:
        raise CliError("sim needs --ebn0")
    stop = StopRule(args.target_errors, args.max_frames, args.max_time)
    choice = DecoderChoice(*_decoder_args(args))
    t0 = time.perf_counter()
    result = run_fer(spec, args.ebn0, stop, args.seed, choice, args.workers,
                     noiseless=args.noiseless)
    print(result.line(), file=out)
    if args.csv:
        fields = ("ebn0_db", "frames", "frame_errors", "bit_errors", "fer", "ber", "stderr",
                  "stop_reason")
        with open(args.csv, "w") as fh:
            fh.write(",".join(fields) + "\n")
            fh.write(f"{result.ebn0_db},{result.frames},{result.frame_errors},"
                     f"{result.bit_errors},{result.fer:.6g},{result.ber:.6g},"
                     f"{result.stderr:.6g},{result.stop_reason.value}\n")
    _timing(out, t0)
    return 0


def cmd_explore(args, out):
    base = args.spec_obj
    try:
        crcs = tuple((w, CRC_BY_WIDTH[w]) for w in args.crc_widths)
    except KeyError as exc:
        raise CliError(f"no CRC polynomial for width {exc.args[0]}; "
                       f"known widths {sorted(CRC_BY_WIDTH)}") from None
    grid = Grid(tuple(Construction(c) for c in args.constructions), crcs,
                tuple(args.lists))
    budget = Budget(min_frame_errors=args.target_errors, workers=args.workers)
    t0 = time.perf_counter()
    rows = explore(base, grid, args.target_fer, tuple(args.ebn0_range), budget, args.seed,
                   args.backend if args.backend != REFERENCE_BACKEND else DEFAULT_BACKEND,
                   progress=lambda r: print(
                       f"{r['construction']} crc{r['crc_width']} L{r['L_max']}: "
                       f"ebn0_db={r['ebn0_db']} {r['stop_reason']}", file=sys.stderr),
                   isolate=True)
    if args.csv:
        write_csv(rows, args.csv)
    else:
        write_csv(rows, out)
    _timing(out if args.csv else sys.stderr, t0)
    return 0


def cmd_gen(args, out):
    spec = args.spec_obj
    res = DecoderResources(spec)
    backend = args.backend if args.backend in BACKENDS else DEFAULT_BACKEND
    if args.list:
        lists = [program_for(res, args.list)]
        sc_first = False
    else:
        lists = [program_for(res, L) for L in spec.list_schedule]
        sc_first = True
    sc = program_for(res, 1)
    text = emit_ascl_module(sc, lists, backend, sc_first)
    manifest = {"spec": {"k_info": spec.k_info, "crc_size": spec.crc_size,
                         "crc_poly": f"0x{spec.crc_poly:X}", "rate": str(spec.rate),
                         "construction": spec.construction.value,
                         "n_mother": spec.n_mother, "n_tx": spec.n_tx},
                "backend": backend, "sc_first": sc_first,
                "programs": [p.manifest() for p in ([sc] + lists)]}
    path = args.emit or f"decoder_{spec.construction.value}_k{spec.k_info}_n{spec.n_mother}.py"
    mpath = write_emitted(text, path, manifest)
    print(f"wrote {path} ({len(text.splitlines())} lines) and {mpath}", file=out)
    return 0


def cmd_verify(args, out):
    spec = args.spec_obj
    res = DecoderResources(spec)
    sizes = [args.list] if args.list else [1] + list(spec.list_schedule)
    t0 = time.perf_counter()
    failed = False
    for L in sizes:
        prog = program_for(res, L)
        report = verify_equivalence(prog, res, args.frames, args.seed, args.ebn0)
        print(f"L={L} interpreter: {report.summary()}", file=out)
        failed |= not report.passed
        if args.emit:
            from .unroller.emit import EmittedDecoder
            backend = args.backend if args.backend in BACKENDS else DEFAULT_BACKEND
            report = verify_equivalence(prog, res, args.frames, args.seed, args.ebn0,
                                        candidate=EmittedDecoder(prog, backend))
            print(f"L={L} emitted: {report.summary()}", file=out)
            failed |= not report.passed
    _timing(out, t0)
    return 1 if failed else 0


def _timing(out, t0):
    print(f"timing: elapsed_s={time.perf_counter() - t0:.3f}", file=out)


# -- parser --------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="polar-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--spec", required=True, help="code spec file (.cfg)")
        p.set_defaults(func=func)
        return p

    def decoder_opts(p):
        p.add_argument("--decoder", choices=DECODER_KINDS, default="ascl")
        p.add_argument("--list", type=int, default=None,
                       help="fixed list size (plain SCL instead of ASCL)")
        p.add_argument("--backend", choices=BACKENDS + (REFERENCE_BACKEND,),
                       default=DEFAULT_BACKEND)

    add("construct", cmd_construct, "print the frozen set and shortening summary")

    p = add("encode", cmd_encode, "encode 0/1 message rows")
    p.add_argument("--input", default="-",
                   help="message file, one frame per line in binary or 0x-hex")
    p.add_argument("--random", type=int, default=None, help="encode N random messages")
    p.add_argument("--seed", type=int, default=default_seed())

    p = add("decode", cmd_decode, "decode LLR rows")
    p.add_argument("--input", default="-", help="LLR file, one frame per line")
    decoder_opts(p)

    p = add("sim", cmd_sim, "Monte-Carlo FER at one Eb/N0")
    p.add_argument("--ebn0", type=float, help="Eb/N0 in dB (information bits)")
    p.add_argument("--target-errors", type=int, default=100,
                   help="stop after this many frame errors")
    p.add_argument("--max-frames", type=int, default=10**7)
    p.add_argument("--max-time", type=float, default=None, help="seconds")
    p.add_argument("--seed", type=int, default=default_seed())
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", default=None, help="also write the result to this CSV")
    p.add_argument("--noiseless", action="store_true")
    decoder_opts(p)

    p = add("explore", cmd_explore, "sweep constructions, CRCs and list sizes")
    p.add_argument("--target-fer", type=float, default=1e-3)
    p.add_argument("--target-errors", type=int, default=50,
                   help="frame errors per bisection step")
    p.add_argument("--ebn0-range", type=float, nargs=2, default=(0.0, 5.0),
                   metavar=("LO", "HI"), help="bisection interval in dB")
    p.add_argument("--constructions", nargs="+", default=["ga", "5g"], help="ga and/or 5g")
    p.add_argument("--crc-widths", type=int, nargs="+", default=[8, 12, 16],
                   help="CRC widths with a known polynomial: 7 8 10 11 12 16")
    p.add_argument("--lists", type=int, nargs="+", default=[8, 32, 64], help="L_max values")
    p.add_argument("--seed", type=int, default=default_seed())
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", default=None, help="write rows here instead of stdout")
    p.add_argument("--backend", choices=BACKENDS, default=DEFAULT_BACKEND)

    p = add("gen", cmd_gen, "emit unrolled decoder source and manifest")
    p.add_argument("--emit", default=None, help="output .py path")
    p.add_argument("--list", type=int, default=None, help="single list size")
    p.add_argument("--backend", choices=BACKENDS, default=DEFAULT_BACKEND)

    p = add("verify", cmd_verify, "check unrolled decoders against the reference")
    p.add_argument("--frames", type=int, default=1000)
    p.add_argument("--seed", type=int, default=default_seed())
    p.add_argument("--ebn0", type=float, default=None)
    p.add_argument("--list", type=int, default=None, help="single list size")
    p.add_argument("--emit", action="store_true", help="also check emitted source")
    p.add_argument("--backend", choices=BACKENDS, default=DEFAULT_BACKEND)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        args.spec_obj = load_spec(args.spec)
        return args.func(args, out)
    except (CliError, SpecError, OSError, ValueError) as exc:
        print(f"polar-lab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
