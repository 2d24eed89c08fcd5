"""Command-line entry point.

Exit status is 0 on success, 1 when an input fails validation (bad schema,
capacity, tolerance) and 2 when a file cannot be read or written.
"""

from __future__ import annotations

import argparse
import math
import sys
from importlib import resources

import numpy as np

from . import cpwl, network
from .compiler import CapacityError, compile_deep, compile_two_layer, deepen, pad_grid
from .cpwl import DomainError, Grid, check_interp_error, sup_distance
from .io import SchemaError, read_json, write_csv, write_json
from .kst import CSV_HEADER, KstValidationError, demo_problem, problem_from_json, rate_experiment
from .network import param_count, shatter_count
from .regions import to_cpwl
from .shatter import SHATTER_CSV_HEADER, shatter_experiment

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# name -> callable on [0, 1]
BUILTIN_FUNCTIONS = {
    "x2": lambda x: x * x,
    "sqrt": np.sqrt,
    "sin": lambda x: np.sin(2 * np.pi * x),
    "abs": lambda x: np.abs(x - 0.5),
    "exp": np.exp,
}


def _describe(net) -> str:
    return (
        f"widths {net.hidden_widths}, depth {net.hidden_depth}, "
        f"params {param_count(net)}, shatter count {shatter_count(net)}"
    )


def _load_cpwl(path, exact):
    return cpwl.from_json(read_json(path), exact=True if exact else None)


def _load_net(path, exact):
    return network.from_json(read_json(path), exact=True if exact else None)


def cmd_compile(args) -> int:
    target = _load_cpwl(args.target, args.exact)
    N, M = args.blocks, args.block_size
    P = target.segment_count
    if P > N * M:
        hint = ""
        if args.deepen:
            L = args.deepen
            hint = f"; at depth {L + 1} with block-size N*L the requirement is N^2*L >= {P}, so N >= {math.ceil(math.sqrt(P / L))}"
        raise CapacityError(f"target has {P} segments but blocks*block-size = {N}*{M} = {N * M}{hint}")
    net = compile_two_layer(pad_grid(target, N * M), N, M)
    if args.deepen:
        net = deepen(net, args.deepen)
    write_json(args.out, network.to_json(net))
    print(f"wrote {args.out}: {_describe(net)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    net = _load_net(args.net, args.exact)
    target = _load_cpwl(args.target, args.exact)
    exact = args.exact or (net.exact and target.exact)
    got = to_cpwl(net, target.lo, target.hi, exact=exact)
    if not exact:
        target = target.to_float()
    dist = sup_distance(got, target)
    ok = dist <= args.tol
    print(f"distance {float(dist):.6g} ({dist}); net segments {got.segment_count}, target segments {target.segment_count}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_to_cpwl(args) -> int:
    net = _load_net(args.net, args.exact)
    f = to_cpwl(net, args.lo, args.hi, exact=args.exact or None)
    write_json(args.out, cpwl.to_json(f))
    print(f"wrote {args.out}: {f.segment_count} segments")
    return EXIT_OK


def cmd_deepen(args) -> int:
    net = deepen(_load_net(args.net, args.exact), args.depth)
    write_json(args.out, network.to_json(net))
    print(f"wrote {args.out}: {_describe(net)}")
    return EXIT_OK


def cmd_compile_deep(args) -> int:
    net = compile_deep(_load_cpwl(args.target, args.exact), args.width, args.depth)
    write_json(args.out, network.to_json(net))
    print(f"wrote {args.out}: {_describe(net)}")
    return EXIT_OK


def bundled_demo_path():
    return resources.files("cpwlnet").joinpath("data/kst_demo.json")


def cmd_kst_rate(args) -> int:
    if args.problem:
        p = problem_from_json(read_json(args.problem))
    elif args.seed is not None:
        p = demo_problem(args.seed, args.d)
    else:
        with resources.as_file(bundled_demo_path()) as path:
            p = problem_from_json(read_json(path))
    res = rate_experiment(p, args.N, args.L, args.samples)
    if args.out:
        write_csv(args.out, CSV_HEADER, res.rows())
    for row in res.rows():
        print(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    if res.degenerate:
        print("all errors are at roundoff level; no slope fitted")
    for L, s in res.slopes_N.items():
        print(f"slope vs N at L={L}: {s:.4f}")
    for N, s in res.slopes_L.items():
        print(f"slope vs L at N={N}: {s:.4f}")
    over = [r for r in res.records if r.measured_error > r.bound + 1e-9]
    if over:
        print(f"{len(over)} cells exceed the error bound")
        return EXIT_INVALID
    return EXIT_OK


def cmd_shatter(args) -> int:
    rep = shatter_experiment(args.points, args.delta, args.patterns, args.seed, args.width, args.depth)
    if args.out:
        write_csv(args.out, SHATTER_CSV_HEADER, rep.rows())
    print(f"{rep.successes}/{len(rep.trials)} patterns realized; widths {rep.trials[0].widths if rep.trials else ()}")
    if rep.trials:
        t = rep.trials[0]
        print(f"shatter count {t.shatter_count} vs n/6 = {t.bound:.4g}: {'consistent' if rep.consistent else 'INCONSISTENT'}")
    return EXIT_OK if rep.successes == len(rep.trials) and rep.consistent else EXIT_INVALID


def cmd_interp_error(args) -> int:
    f = BUILTIN_FUNCTIONS[args.function]
    rep = check_interp_error(f, Grid.uniform(args.segments), samples=args.samples)
    print(f"error {rep.error!r}; bound 2*omega(h) = {rep.bound!r}; {'ok' if rep.ok else 'VIOLATED'}")
    return EXIT_OK if rep.ok else EXIT_INVALID


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cpwlnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compile", help="compile a CPwL target into a two-layer (or deepened) network")
    c.add_argument("--target", required=True)
    c.add_argument("--blocks", type=_positive_int, required=True, help="block count N")
    c.add_argument("--block-size", type=_positive_int, required=True, help="segments per block M (>= 3)")
    c.add_argument("--deepen", type=_positive_int, help="convert to L+1 hidden layers")
    c.add_argument("--out", required=True)
    c.add_argument("--exact", action="store_true", help="rational arithmetic")
    c.set_defaults(func=cmd_compile)

    c = sub.add_parser("compile-deep", help="compile at capacity N^2 L with L+1 hidden layers")
    c.add_argument("--target", required=True)
    c.add_argument("--width", type=_positive_int, required=True, help="N")
    c.add_argument("--depth", type=_positive_int, required=True, help="L")
    c.add_argument("--out", required=True)
    c.add_argument("--exact", action="store_true")
    c.set_defaults(func=cmd_compile_deep)

    c = sub.add_parser("verify", help="check a network against a CPwL target")
    c.add_argument("--net", required=True)
    c.add_argument("--target", required=True)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--exact", action="store_true")
    c.set_defaults(func=cmd_verify)

    c = sub.add_parser("to-cpwl", help="extract the CPwL function of a scalar network")
    c.add_argument("--net", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--lo", type=float, default=0.0)
    c.add_argument("--hi", type=float, default=1.0)
    c.add_argument("--exact", action="store_true")
    c.set_defaults(func=cmd_to_cpwl)

    c = sub.add_parser("deepen", help="turn a two-layer network into L+1 hidden layers")
    c.add_argument("--net", required=True)
    c.add_argument("--depth", type=_positive_int, required=True, help="L")
    c.add_argument("--out", required=True)
    c.add_argument("--exact", action="store_true")
    c.set_defaults(func=cmd_deepen)

    c = sub.add_parser("kst-rate", help="error-rate experiment for a superposition problem")
    src = c.add_mutually_exclusive_group()
    src.add_argument("--problem", help="problem JSON (default: bundled demo)")
    src.add_argument("--seed", type=int, help="generate the demo problem from this seed")
    c.add_argument("--d", type=int, default=2, help="dimension for a generated demo problem")
    c.add_argument("--N", type=_positive_int, nargs="+", required=True)
    c.add_argument("--L", type=_positive_int, nargs="+", required=True)
    c.add_argument("--samples", type=_positive_int, help="samples per axis")
    c.add_argument("--out")
    c.set_defaults(func=cmd_kst_rate)

    c = sub.add_parser("shatter", help="realize random sign patterns on separated points")
    c.add_argument("--points", type=_positive_int, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--patterns", type=_positive_int, default=20)
    c.add_argument("--width", type=_positive_int, required=True, help="N")
    c.add_argument("--depth", type=_positive_int, required=True, help="L")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_shatter)

    c = sub.add_parser("interp-error", help="interpolation error against the modulus bound")
    c.add_argument("--function", choices=sorted(BUILTIN_FUNCTIONS), default="x2")
    c.add_argument("--segments", type=_positive_int, required=True)
    c.add_argument("--samples", type=_positive_int, default=cpwl.DEFAULT_SAMPLES)
    c.set_defaults(func=cmd_interp_error)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CapacityError, KstValidationError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
