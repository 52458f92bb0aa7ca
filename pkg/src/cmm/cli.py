"""Command-line interface.

Data goes to stdout, timing and diagnostics to stderr. Indices on the
command line and in printed output are 1-based, like Matrix Market.

Exit codes: 0 ok, 1 parse error, 2 dimension mismatch or bad index,
3 I/O error, 4 wrong sketch kind, 5 memory cap exceeded.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
import tracemalloc

import numpy as np

from . import matrix as mx
from . import sketchfile
from .covariance import (
    OBSERVATIONS_AS_ROWS,
    VARIABLES_AS_ROWS,
    SampleFormatError,
    SampleSet,
    correlated_rows_instance,
    load_samples_csv,
    scan_correlations,
    sketch_covariance,
    write_samples_csv,
)
from .estimate import estimate_frobenius_ub, estimate_nnz
from .recovery import (
    DEFAULT_DELTA,
    DEFAULT_KAPPA,
    RecoverableSketch,
    compressed_product_recoverable,
    default_threshold,
    extract_sparse_approx,
)
from .reference import err_f_k, exact_product
from .sketch import CapacityError, SketchParams, compressed_product, decompress, decompress_all

EXIT_PARSE, EXIT_DIMS, EXIT_IO, EXIT_KIND, EXIT_CAP = 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(x: float) -> str:
    """17 significant digits; integral values keep a trailing ``.0``."""
    s = format(float(x), ".17g")
    if s.lstrip("-").isdigit():
        s += ".0"
    return s


def _err(*parts) -> None:
    print(*parts, file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _err(f"{self.prog}: error: {message}")
        raise SystemExit(EXIT_PARSE)


def _load_matrix(path: str):
    try:
        return mx.load_matrix_market(path)
    except mx.MatrixMarketError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from exc
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from exc


def _load_pair(args):
    a = _load_matrix(args.a)
    b = _load_matrix(args.b)
    if a.cols != b.rows:
        raise CliError(f"dimension mismatch: A is {a.rows}x{a.cols}, B is {b.rows}x{b.cols}", EXIT_DIMS)
    return a, b


def _load_sketch(path: str):
    try:
        return sketchfile.load(path)
    except sketchfile.SketchFileError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from exc
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from exc


def _save_sketch(path: str, sk) -> None:
    try:
        sketchfile.save(path, sk)
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from exc


def _warm_up() -> None:
    # loads the compiled kernels so that timing and memory exclude the JIT
    compressed_product(np.ones((1, 1)), np.ones((1, 1)), SketchParams(2, 1))


def _measured(fn, *args, **kwargs):
    """Run ``fn`` and return (result, seconds, peak traced bytes)."""
    _warm_up()
    tracemalloc.start()
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    finally:
        elapsed = time.perf_counter() - t0
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
    return out, elapsed, peak


# ---------------------------------------------------------------- commands


def cmd_sketch(args) -> None:
    if args.buckets < 2:
        raise CliError("--buckets must be >= 2", EXIT_PARSE)
    a, b = _load_pair(args)
    params = SketchParams(args.buckets, args.reps, args.seed)
    if args.recoverable:
        sk, elapsed, peak = _measured(compressed_product_recoverable, a, b, params,
                                      delta=args.delta, threads=args.threads)
    else:
        sk, elapsed, peak = _measured(compressed_product, a, b, params, threads=args.threads)
    _save_sketch(args.out, sk)
    mode = "recoverable" if args.recoverable else "plain"
    line = f"mode={mode} b={sk.params.buckets} d={sk.reps} requested_b={args.buckets}"
    if args.recoverable:
        line += f" ell={sk.ell}"
    print(line)
    _err(f"wall_time_s={elapsed:.6f} peak_aux_bytes={peak}")


def cmd_query(args) -> None:
    sk = _load_sketch(args.sketch)
    base = sk.base if isinstance(sk, RecoverableSketch) else sk
    i, j = args.row - 1, args.col - 1
    try:
        est = decompress(base, i, j)
    except IndexError as exc:
        raise CliError(f"index out of range: ({args.row}, {args.col}) in a "
                       f"{base.dims[0]}x{base.dims[2]} product", EXIT_DIMS) from exc
    print(f"estimate={fmt(est.value)}")
    print("reps=" + " ".join(fmt(v) for v in est.per_rep))


def cmd_topk(args) -> None:
    sk = _load_sketch(args.sketch)
    if not isinstance(sk, RecoverableSketch):
        raise CliError("topk needs a recoverable sketch (build with --recoverable)", EXIT_KIND)
    if args.auto_threshold:
        if not (args.a and args.b):
            raise CliError("--auto-threshold needs the original matrices via --a and --b", EXIT_PARSE)
        a, b = _load_pair(args)
        threshold = default_threshold(a, b, sk.buckets, args.kappa, seed=args.seed)
        _err(f"auto_threshold={fmt(threshold)}")
    elif args.threshold is not None:
        threshold = args.threshold
    else:
        raise CliError("give --threshold or --auto-threshold", EXIT_PARSE)
    if not threshold > 0:
        raise CliError("threshold must be positive", EXIT_PARSE)
    rows = extract_sparse_approx(sk, threshold)
    if args.k is not None:
        rows = rows[:args.k]
    for i, j, v in rows:
        print(f"{i + 1} {j + 1} {fmt(v)}")


def cmd_estimate(args) -> None:
    a, b = _load_pair(args)
    if args.kind == "nnz":
        est = estimate_nnz(a, b, args.reps, args.seed)
        print(f"nnz upper bound: {est.upper_bound} (terminating b = {est.buckets}, d = {est.reps}"
              + (", capped" if est.capped else "") + ")")
        print(f"kind=nnz upper_bound={est.upper_bound} buckets={est.buckets} reps={est.reps} "
              f"capped={int(est.capped)} level_failure_prob={fmt(est.failure_probability)}")
    else:
        est = estimate_frobenius_ub(a, b, args.reps, args.seed)
        print(f"squared Frobenius upper bound: {fmt(est.upper_bound)} "
              f"(median X^2 = {fmt(est.median_square)}, d = {est.reps})")
        print(f"kind=frobenius median_square={fmt(est.median_square)} "
              f"upper_bound={fmt(est.upper_bound)} reps={est.reps}")


def cmd_cov(args) -> None:
    try:
        samples = load_samples_csv(args.samples, args.layout)
    except SampleFormatError as exc:
        raise CliError(f"{args.samples}: {exc}", EXIT_PARSE) from exc
    except ValueError as exc:
        raise CliError(f"{args.samples}: {exc}", EXIT_PARSE) from exc
    except OSError as exc:
        raise CliError(f"{args.samples}: {exc}", EXIT_IO) from exc
    params = SketchParams(args.buckets, args.reps, args.seed)
    cs, elapsed, peak = _measured(sketch_covariance, samples, params, args.recoverable, args.threads)
    _err(f"wall_time_s={elapsed:.6f} peak_aux_bytes={peak} n={samples.n} m={samples.m} "
         f"b={cs.base.buckets} d={cs.base.reps}")
    if args.out:
        _save_sketch(args.out, cs.sketch)
    if args.scan:
        try:
            pairs = scan_correlations(cs, args.threshold, sublinear=args.sublinear)
        except CapacityError as exc:
            raise CliError(str(exc), EXIT_CAP) from exc
        for i, j, v in pairs:
            print(f"{i + 1} {j + 1} {fmt(v)}")


def cmd_compare(args) -> None:
    a, b = _load_pair(args)
    params = SketchParams(args.buckets, args.reps, args.seed)
    try:
        exact = exact_product(a, b)
        sk = compressed_product(a, b, params, threads=args.threads)
        approx = decompress_all(sk)
    except CapacityError as exc:
        raise CliError(str(exc), EXIT_CAP) from exc
    nb = sk.buckets
    errors = np.abs(approx - exact)
    tail = err_f_k(exact, nb // 20)
    bound = 12.0 * math.sqrt(tail / nb)
    held = errors < bound if bound > 0 else errors == 0
    print(f"b={nb} d={sk.reps}")
    print(f"max_abs_error={fmt(errors.max() if errors.size else 0.0)}")
    print(f"frobenius_ab={fmt(np.linalg.norm(exact))}")
    print(f"err_f_tail={fmt(tail)} tail_k={nb // 20}")
    print(f"tail_bound={fmt(bound)}")
    print(f"bound_held_fraction={fmt(held.mean() if held.size else 1.0)}")
    print(f"bound_held_all={int(bool(held.all()))}")


def cmd_make_correlated(args) -> None:
    i, j = args.pair
    data = correlated_rows_instance(args.n, args.m, (i - 1, j - 1), args.rho, args.seed)
    try:
        write_samples_csv(args.out, SampleSet(data))
    except OSError as exc:
        raise CliError(f"{args.out}: {exc}", EXIT_IO) from exc
    print(f"wrote {args.n}x{args.m} samples, rows {i} and {j} correlated (rho={args.rho})")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cmm", description="Compressed matrix multiplication via Count-Sketch.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def operands(sp, required=True):
        sp.add_argument("--a", required=required, help="left operand (.mtx)")
        sp.add_argument("--b", required=required, help="right operand (.mtx)")

    def sizing(sp, reps_default=None):
        sp.add_argument("--buckets", type=int, required=True, help="b, rounded up to a power of two")
        sp.add_argument("--reps", type=int, default=reps_default, help="d (default 6*ceil(lg n))")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("sketch", help="sketch A*B into a file")
    operands(sp)
    sizing(sp)
    sp.add_argument("--recoverable", action="store_true")
    sp.add_argument("--delta", type=float, default=float(DEFAULT_DELTA), help="code error fraction")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sketch)

    sp = sub.add_parser("query", help="estimate one entry")
    sp.add_argument("--sketch", required=True)
    sp.add_argument("--row", type=int, required=True)
    sp.add_argument("--col", type=int, required=True)
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("topk", help="list significant entries of a recoverable sketch")
    sp.add_argument("--sketch", required=True)
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--threshold", type=float)
    group.add_argument("--auto-threshold", action="store_true")
    sp.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int, default=0)
    operands(sp, required=False)
    sp.set_defaults(func=cmd_topk)

    sp = sub.add_parser("estimate", help="compressibility estimates")
    operands(sp)
    sp.add_argument("kind", choices=["nnz", "frobenius"])
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("cov", help="sketch a sample covariance matrix")
    sp.add_argument("--samples", required=True, help="CSV file")
    sp.add_argument("--layout", choices=[VARIABLES_AS_ROWS, OBSERVATIONS_AS_ROWS],
                    default=VARIABLES_AS_ROWS, help="what one CSV row holds")
    sizing(sp)
    sp.add_argument("--recoverable", action="store_true")
    sp.add_argument("--threshold", type=float, help="default: 3x the sketch noise level")
    sp.add_argument("--sublinear", action="store_true", help="scan via code decoding (needs --recoverable)")
    sp.add_argument("--out")
    sp.add_argument("--scan", action="store_true")
    sp.set_defaults(func=cmd_cov)

    sp = sub.add_parser("compare", help="compare the sketch against the exact product")
    operands(sp)
    sizing(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("make-correlated", help="write a random sample CSV with one correlated row pair")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--m", type=int, default=100)
    sp.add_argument("--pair", type=int, nargs=2, default=(21, 66), metavar=("I", "J"))
    sp.add_argument("--rho", type=float, default=0.9)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_make_correlated)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "estimate" and args.reps is None:
        args.reps = 10 if args.kind == "nnz" else None
    if args.command == "cov" and not (args.out or args.scan):
        _err("cmm cov: give --out PATH and/or --scan")
        return EXIT_PARSE
    if args.command == "cov" and args.sublinear and not args.recoverable:
        _err("cmm cov: --sublinear needs --recoverable")
        return EXIT_PARSE
    try:
        args.func(args)
    except CliError as exc:
        _err(f"cmm {args.command}: {exc}")
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
