"""
Command-line entry point.

    hamlearn simulate   --truth H.json --out table.json [--shots 1024|exact] [--noise 0.05]
    hamlearn learn      --data table.json|table.csv --out learned.json [--mask hyperfine]
    hamlearn eval       --hamiltonian H.json --data table.json
    hamlearn compare    A.json B.json
    hamlearn bench-expm --sizes 2,4,8 --trials 100 --out bench.csv

Exit codes: 0 ok, 1 benchmark oracle mismatch, 2 input error,
3 not converged (max_iters), 4 all runs diverged.

Every command that writes ``--out PATH`` also writes
``PATH.manifest.json`` recording the resolved arguments, input digests,
seed, version and wall time.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cost import cost
from .dataset import (
    load_table,
    pairs_from_table,
    read_counts_csv,
    save_table,
    simulate_counts,
    standard_input_labels,
    standard_input_states,
    table1_input_labels,
    table1_input_states,
)
from .hamiltonian import (
    StructureMask,
    load_hamiltonian,
    matrix_to_weights,
    raw_error,
    save_hamiltonian,
    shift_aligned_error,
)
from .linalg import ContractError, NumericalError, expm_taylor, expm_unitary, max_norm
from .optimizer import FitFailure, OptimizerConfig, fit

log = logging.getLogger("hamlearn")

EXIT_OK = 0
EXIT_ORACLE = 1
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_DIVERGED = 4


class InputError(Exception):
    pass


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=str)
        fh.write("\n")


def _write_manifest(args, inputs, outputs, t0):
    if not args.out:
        return
    resolved = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and not callable(v)
    }
    manifest = {
        "command": args.command,
        "arguments": resolved,
        "inputs": {str(p): _digest(p) for p in inputs if p},
        "seed": args.seed,
        "version": __version__,
        "wall_time": time.perf_counter() - t0,
        "outputs": [str(p) for p in outputs],
    }
    _write_json(str(args.out) + ".manifest.json", manifest)


def _load_h(path):
    try:
        return load_hamiltonian(path)
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc
    except ContractError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_table_any(path, t=None, shots=None):
    try:
        if str(path).lower().endswith(".csv"):
            if t is None:
                raise InputError(f"{path}: CSV input needs --t")
            return read_counts_csv(path, t, shots)
        return load_table(path)
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc
    except ContractError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _parse_shots(text):
    if text.lower() == "exact":
        return None
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("shots must be a positive integer or 'exact'") from exc
    if value <= 0:
        raise argparse.ArgumentTypeError("shots must be positive")
    return value


def _parse_sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("sizes must be comma-separated integers") from exc
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def _load_mask(source, n):
    if source is None:
        return None
    if source == "hyperfine":
        mask = StructureMask.hyperfine()
    else:
        try:
            with open(source) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{source}: {exc}") from exc
        pairs = obj.get("mask") if isinstance(obj, dict) else obj
        if pairs is None:
            raise InputError(f"{source}: no 'mask' field")
        try:
            mask = StructureMask.from_one_based(n, pairs)
        except (ContractError, TypeError, ValueError) as exc:
            raise InputError(f"{source}: {exc}") from exc
    if mask.dim != n:
        raise InputError(f"mask is for dim {mask.dim} but the data has dim {n}")
    return mask


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    t0 = time.perf_counter()
    H, _ = _load_h(args.truth)
    n = H.shape[0]
    if args.design == "table1":
        inputs, labels = table1_input_states(n), table1_input_labels(n)
    else:
        if n < 2:
            raise InputError("the standard input design needs dim >= 2")
        inputs, labels = standard_input_states(n), standard_input_labels(n)
    try:
        table = simulate_counts(
            H, inputs, args.t, shots=args.shots, seed=args.seed, noise=args.noise, labels=labels
        )
    except ContractError as exc:
        raise InputError(str(exc)) from exc
    save_table(args.out, table)
    log.info("wrote %d rows to %s", len(table.rows), args.out)
    _write_manifest(args, [args.truth], [args.out], t0)
    return EXIT_OK


def _learn_config(args, n):
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.config}: {exc}") from exc
    overrides = {
        "alpha": args.alpha,
        "beta": args.beta,
        "max_iters": args.max_iters,
        "cost_tol": args.cost_tol,
        "grad_tol": args.grad_tol,
        "fd_step": args.fd_step,
        "init_scale": args.init_scale,
        "restarts": args.restarts,
        "seed": args.seed,
        "eig_method": args.eig_method,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_unwrap:
        cfg["unwrap"] = False
    try:
        config = OptimizerConfig.from_dict(cfg, dim=n)
    except (ContractError, TypeError) as exc:
        raise InputError(f"config: {exc}") from exc
    mask = _load_mask(args.mask, n)
    if mask is not None:
        config = config.updated(mask=mask)
    if args.warm_start:
        W, _ = _load_h(args.warm_start)
        if W.shape[0] != n:
            raise InputError(f"warm start has dim {W.shape[0]}, data has dim {n}")
        config = config.updated(warm_start=matrix_to_weights(W))
    return config


def cmd_learn(args):
    t0 = time.perf_counter()
    table = _load_table_any(args.data, args.t, args.csv_shots)
    if not table.rows:
        raise InputError(f"{args.data}: data file has no rows")
    try:
        pairs = pairs_from_table(table)
    except ContractError as exc:
        raise InputError(f"{args.data}: {exc}") from exc
    n = table.dim
    cfg = _learn_config(args, n)
    reference = None
    if args.reference:
        reference, _ = _load_h(args.reference)
        if reference.shape[0] != n:
            raise InputError(f"reference has dim {reference.shape[0]}, data has dim {n}")
    try:
        report = fit(pairs, n, cfg, reference=reference)
    except FitFailure as exc:
        log.error("%s", exc)
        _write_json(str(args.out) + ".report.json", {"status": "diverged", "runs": exc.runs})
        _write_manifest(args, [args.data, args.config, args.reference], [], t0)
        return EXIT_DIVERGED

    save_hamiltonian(args.out, report.learned, cfg.mask)
    report_path = str(args.out) + ".report.json"
    rep = report.to_dict()
    rep["config"] = cfg.to_dict()
    _write_json(report_path, rep)
    log.info(
        "cost %.6g after %d iterations (%s, run %d)",
        report.final_cost,
        report.iterations,
        report.reason,
        report.best_run,
    )
    if report.reference_error is not None:
        log.info("shift-aligned error vs reference: %.3e", report.reference_error)
    _write_manifest(
        args, [args.data, args.config, args.reference, args.warm_start], [args.out, report_path], t0
    )
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_eval(args):
    H, _ = _load_h(args.hamiltonian)
    table = _load_table_any(args.data, args.t, args.csv_shots)
    if H.shape[0] != table.dim:
        raise InputError(f"Hamiltonian has dim {H.shape[0]}, data has dim {table.dim}")
    if not table.rows:
        raise InputError(f"{args.data}: data file has no rows")
    try:
        value = cost(matrix_to_weights(H), pairs_from_table(table))
    except ContractError as exc:
        raise InputError(str(exc)) from exc
    print(f"total {value.total!r}")
    print(f"sum {value.sum!r}")
    for k, c in enumerate(value.per_pair, 1):
        print(f"pair {k} {float(c)!r}")
    return EXIT_OK


def cmd_compare(args):
    A, _ = _load_h(args.a)
    B, _ = _load_h(args.b)
    if A.shape != B.shape:
        raise InputError(f"dimension mismatch: {A.shape[0]} vs {B.shape[0]}")
    aligned, f = shift_aligned_error(A, B, return_shift=True)
    print(f"raw {raw_error(A, B)!r}")
    print(f"aligned {aligned!r}")
    print(f"shift {f!r}")
    return EXIT_OK


def cmd_bench_expm(args):
    t0 = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    rows = []
    worst = 0.0
    for n in args.sizes:
        timings = {"eig": [], "taylor": []}
        diff = 0.0
        for _ in range(args.trials):
            A = rng.uniform(-1.0, 1.0, (n, n))
            H = np.triu(A) + np.triu(A, 1).T
            s = time.perf_counter_ns()
            E1 = expm_unitary(H, args.t, method=args.eig_method)
            timings["eig"].append(time.perf_counter_ns() - s)
            s = time.perf_counter_ns()
            E2 = expm_taylor(H, args.t)
            timings["taylor"].append(time.perf_counter_ns() - s)
            diff = max(diff, max_norm(E1 - E2))
        worst = max(worst, diff)
        for method, ts in timings.items():
            rows.append([n, method, float(np.mean(ts)), float(np.std(ts)), diff])
        log.info(
            "n=%d speedup %.1fx, max diff %.2e",
            n,
            np.mean(timings["taylor"]) / np.mean(timings["eig"]),
            diff,
        )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "method", "mean_ns", "stddev_ns", "max_norm_diff"])
        writer.writerows(rows)
    _write_manifest(args, [], [args.out], t0)
    if worst > 1e-12:
        log.error("eigendecomposition and Taylor exponentials differ by %.3e", worst)
        return EXIT_ORACLE
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(p, suppress):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--threads", type=int, default=default, help="BLAS thread limit")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False)
    p.add_argument("--out", type=Path, default=default)


def _add_time_flags(p):
    p.add_argument("--t", type=float, default=None, help="evolution time for CSV rows")
    p.add_argument("--csv-shots", type=int, default=None, help="shots per CSV row (checked)")


def build_parser():
    parser = argparse.ArgumentParser(prog="hamlearn", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a count table from a known Hamiltonian")
    _add_common(p, suppress=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--t", type=float, default=0.785)
    p.add_argument("--shots", type=_parse_shots, default=1024, help="integer or 'exact'")
    p.add_argument("--noise", type=float, default=0.0, help="depolarizing weight")
    p.add_argument("--design", choices=["standard", "table1"], default="standard")
    p.set_defaults(func=cmd_simulate, needs_out=True)

    p = sub.add_parser("learn", help="learn a Hamiltonian from a count table")
    _add_common(p, suppress=True)
    p.add_argument("--data", required=True)
    _add_time_flags(p)
    p.add_argument("--config", default=None)
    p.add_argument("--mask", default=None, help="'hyperfine' or a JSON file of 1-based pairs")
    p.add_argument("--reference", default=None)
    p.add_argument("--warm-start", default=None)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--cost-tol", type=float)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--init-scale", type=float)
    p.add_argument("--restarts", type=int)
    p.add_argument("--eig-method", choices=["lapack", "jacobi"])
    p.add_argument("--no-unwrap", action="store_true")
    p.set_defaults(func=cmd_learn, needs_out=True)

    p = sub.add_parser("eval", help="cost of a Hamiltonian against a count table")
    _add_common(p, suppress=True)
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--data", required=True)
    _add_time_flags(p)
    p.set_defaults(func=cmd_eval, needs_out=False)

    p = sub.add_parser("compare", help="raw and shift-aligned distance between two Hamiltonians")
    _add_common(p, suppress=True)
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare, needs_out=False)

    p = sub.add_parser("bench-expm", help="time exp(-itH) by diagonalization vs Taylor")
    _add_common(p, suppress=True)
    p.add_argument("--sizes", type=_parse_sizes, default=[2, 4, 8, 16, 32])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--t", type=float, default=0.785)
    p.add_argument("--eig-method", choices=["lapack", "jacobi"], default="lapack")
    p.set_defaults(func=cmd_bench_expm, needs_out=True)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if args.needs_out and not args.out:
        print(f"hamlearn {args.command}: --out is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return args.func(args)
        return args.func(args)
    except InputError as exc:
        print(f"hamlearn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"hamlearn {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
