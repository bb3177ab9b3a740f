"""Command-line entry points.

Exit codes: 0 success, 2 for bad input (usage, files, dimensions), 3 for
numerical failures (singular pencils, degenerate quotients, divergence).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .errors import (
    DegenerateClass,
    DimMismatch,
    EmptySlice,
    IndexOutOfRange,
    Indivisible,
    ParseError,
    RifleError,
    TooFewSamples,
    TooLarge,
    TooSmall,
)
from .bench import (
    ExperimentSpec,
    _fit_direction,
    cross_validate_k,
    load_pair_csv,
    read_matrix_csv,
    run_experiment,
)
from .linalg import SymMatrix
from .models import LabeledDataset, PairedDataset, SlicedDataset, cca_build, cca_split, fda_build, sir_build
from .oracle import theorem1_quantities
from .rng import RngState
from .simdata import (
    dump_scenario,
    gen_cca,
    gen_fda_binary,
    gen_fda_multiclass,
    gen_planted_gep,
    write_matrix_csv,
)
from .solver import RifleConfig, WarmStartSchedule, rifle, rifle_warm_start

_USAGE_ERRORS = (
    ParseError,
    DimMismatch,
    IndexOutOfRange,
    TooLarge,
    TooSmall,
    Indivisible,
    DegenerateClass,
    EmptySlice,
    TooFewSamples,
)


def _sparse(v: np.ndarray) -> dict:
    return {str(i): float(v[i]) for i in np.flatnonzero(v)}


def _parse_schedule(text):
    if text is None:
        return None
    return WarmStartSchedule(tuple(int(p) for p in text.split(",")))


def _solve_pair(pair, k, eta, seed, schedule, plain):
    init = RngState(seed, 0).normals(pair.dim)
    config = RifleConfig(k=k, eta=eta, init=init)
    if plain:
        return rifle(pair, config)
    return rifle_warm_start(pair, config, schedule)


def _result_payload(result) -> dict:
    v = result.v
    return {
        "v": _sparse(v),
        "support": [int(i) for i in np.flatnonzero(v)],
        "rho": float(result.rho),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "nnz": int(np.count_nonzero(v)),
    }


def _read_labels(path) -> np.ndarray:
    mat = read_matrix_csv(path)
    flat = mat.ravel()
    if mat.shape[1] != 1:
        raise ParseError(f"{path}: expected one label per line")
    if not np.all(flat == flat.astype(int)):
        raise ParseError(f"{path}: labels must be integers")
    return flat.astype(int)


def _cmd_solve(args) -> dict:
    pair = load_pair_csv(args.a, args.b)
    result = _solve_pair(pair, args.k, args.eta, args.seed, _parse_schedule(args.schedule), args.plain)
    payload = _result_payload(result)
    payload["asym_warning"] = bool(pair.a.asym_warning or pair.b.asym_warning)
    return payload


def _select_and_fit(problem_builder, data, kind, args):
    rng = RngState(args.seed, 0)
    if args.k_grid is not None:
        grid = tuple(int(p) for p in args.k_grid.split(","))
        cv = cross_validate_k(
            data, kind, grid, rng, folds=args.folds, eta=args.eta,
            slices=getattr(args, "slices", 2),
        )
        k = cv.selected
    else:
        if args.k is None:
            raise ValueError("provide --k or --k-grid")
        k = args.k
    problem = problem_builder()
    schedule = _parse_schedule(args.schedule)
    result = _fit_direction(
        problem.pair, k, args.eta, rng, warm=True,
        schedule=schedule.k_sequence if schedule is not None else None,
    )
    return problem, k, result


def _cmd_fda(args) -> dict:
    data = LabeledDataset(read_matrix_csv(args.x), _read_labels(args.labels))
    problem, k, result = _select_and_fit(
        lambda: fda_build(data, diagonal_within=args.diagonal_within), data, "fda", args
    )
    payload = _result_payload(result)
    payload["selected_k"] = int(k)
    return payload


def _cmd_cca(args) -> dict:
    data = PairedDataset(read_matrix_csv(args.x), read_matrix_csv(args.y))
    problem, k, result = _select_and_fit(lambda: cca_build(data), data, "cca", args)
    split = cca_split(result.v, problem.meta)
    payload = {
        "v_x": _sparse(split.x),
        "v_y": _sparse(split.y),
        "zero_x": split.zero_x,
        "zero_y": split.zero_y,
        "rho": float(result.rho),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "selected_k": int(k),
        "nnz": int(np.count_nonzero(result.v)),
    }
    return payload


def _cmd_sir(args) -> dict:
    x = read_matrix_csv(args.x)
    response = read_matrix_csv(args.response).ravel()
    sliced = SlicedDataset(x, response, args.slices)
    labels_like = np.all(response == response.astype(int)) and len(np.unique(response)) == args.slices
    if args.k_grid is not None and not labels_like:
        raise ValueError("CV for sir requires a categorical response with one class per slice")
    if args.k_grid is not None:
        data = LabeledDataset(x, response.astype(int))
        problem, k, result = _select_and_fit(lambda: sir_build(sliced), data, "sir", args)
    else:
        problem = sir_build(sliced)
        rng = RngState(args.seed, 0)
        init = rng.normals(problem.pair.dim)
        config = RifleConfig(k=args.k, eta=args.eta, init=init)
        result = rifle_warm_start(problem.pair, config, _parse_schedule(args.schedule))
        k = args.k
    payload = _result_payload(result)
    payload["selected_k"] = int(k)
    return payload


def _cmd_simulate(args) -> dict:
    rng = RngState(args.seed, 0)
    extra = {"seed": args.seed}
    if args.scenario == "fda-binary":
        scenario = gen_fda_binary(args.d, args.n_per_class, rng)
        extra["n_per_class"] = args.n_per_class
        return dump_scenario(scenario, args.out, extra)
    if args.scenario == "fda-multiclass":
        scenario = gen_fda_multiclass(args.d, args.n_per_class, rng)
        extra["n_per_class"] = args.n_per_class
        return dump_scenario(scenario, args.out, extra)
    if args.scenario == "cca":
        scenario = gen_cca(args.d, args.n, rng)
        extra["n"] = args.n
        return dump_scenario(scenario, args.out, extra)
    if args.scenario == "planted":
        import os

        pair, w = gen_planted_gep(args.d, args.s, args.lambda1, rng)
        os.makedirs(args.out, exist_ok=True)
        write_matrix_csv(os.path.join(args.out, "a.csv"), pair.a.values)
        write_matrix_csv(os.path.join(args.out, "b.csv"), pair.b.values)
        write_matrix_csv(os.path.join(args.out, "w.csv"), w.reshape(1, -1))
        manifest = {
            "kind": "planted",
            "d": args.d,
            "s": args.s,
            "lambda1": args.lambda1,
            "seed": args.seed,
            "files": {"a": "a.csv", "b": "b.csv", "w": "w.csv"},
        }
        with open(os.path.join(args.out, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest
    raise ValueError(f"unknown scenario {args.scenario!r}")


def _cmd_bench(args) -> dict:
    spec = ExperimentSpec.from_json(args.spec)
    out = args.out if args.out is not None else spec.out
    if out is None:
        raise ValueError("provide --out or an 'out' field in the spec")
    report = run_experiment(spec, out)
    return {
        "out": out,
        "spec_hash": report.spec_hash,
        "rows": len(report.rows),
        "n_failed": report.n_failed,
        "aggregates": report.aggregates,
    }


def _cmd_diagnose(args) -> dict:
    pair = load_pair_csv(args.a, args.b)
    if args.ea is not None or args.eb is not None:
        if args.ea is None or args.eb is None:
            raise ValueError("provide both --ea and --eb or neither")
        perturb_pair = load_pair_csv(args.ea, args.eb)
        perturb = (perturb_pair.a, perturb_pair.b)
    else:
        zero = SymMatrix(np.zeros((pair.dim, pair.dim)))
        perturb = (zero, zero)
    quantities = theorem1_quantities(
        pair, perturb, s=args.s, k=args.k, eta=args.eta,
        a=args.a_const, c=args.c_const, b=args.b_const,
    )
    return dataclasses.asdict(quantities)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rifle",
        description="Sparse generalized eigenvalue estimation by truncated Rayleigh flow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p, with_k=True):
        if with_k:
            group = p.add_mutually_exclusive_group(required=True)
            group.add_argument("--k", type=int, help="truncation cardinality")
            group.add_argument("--k-grid", help="comma-separated k grid for 5-fold CV")
        p.add_argument("--eta", type=float, default=None, help="step size (default: auto)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--schedule", help="comma-separated warm-start cardinalities")
        p.add_argument("--folds", type=int, default=5)

    p_solve = sub.add_parser("solve", help="solve a pencil given as two CSV matrices")
    p_solve.add_argument("--a", required=True)
    p_solve.add_argument("--b", required=True)
    p_solve.add_argument("--k", type=int, required=True)
    p_solve.add_argument("--eta", type=float, default=None)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--schedule", help="comma-separated warm-start cardinalities")
    p_solve.add_argument("--plain", action="store_true", help="single stage, no warm start")
    p_solve.set_defaults(handler=_cmd_solve)

    p_fda = sub.add_parser("fda", help="sparse discriminant direction from labeled data")
    p_fda.add_argument("--x", required=True)
    p_fda.add_argument("--labels", required=True)
    p_fda.add_argument("--diagonal-within", action="store_true")
    add_solver_flags(p_fda)
    p_fda.set_defaults(handler=_cmd_fda)

    p_cca = sub.add_parser("cca", help="sparse canonical directions from paired data")
    p_cca.add_argument("--x", required=True)
    p_cca.add_argument("--y", required=True)
    add_solver_flags(p_cca)
    p_cca.set_defaults(handler=_cmd_cca)

    p_sir = sub.add_parser("sir", help="sparse SIR direction from response data")
    p_sir.add_argument("--x", required=True)
    p_sir.add_argument("--response", required=True)
    p_sir.add_argument("--slices", type=int, default=2)
    add_solver_flags(p_sir)
    p_sir.set_defaults(handler=_cmd_sir)

    p_sim = sub.add_parser("simulate", help="generate a seeded scenario to CSV files")
    p_sim.add_argument("--scenario", required=True,
                       choices=["fda-binary", "fda-multiclass", "cca", "planted"])
    p_sim.add_argument("--d", type=int, required=True)
    p_sim.add_argument("--n-per-class", type=int, default=100)
    p_sim.add_argument("--n", type=int, default=200)
    p_sim.add_argument("--s", type=int, default=5)
    p_sim.add_argument("--lambda1", type=float, default=1.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(handler=_cmd_simulate)

    p_bench = sub.add_parser("bench", help="run an experiment spec")
    p_bench.add_argument("--spec", required=True)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(handler=_cmd_bench)

    p_diag = sub.add_parser("diagnose", help="convergence-guarantee constants for a small pencil")
    p_diag.add_argument("--a", required=True)
    p_diag.add_argument("--b", required=True)
    p_diag.add_argument("--ea", default=None, help="perturbation of A (CSV)")
    p_diag.add_argument("--eb", default=None, help="perturbation of B (CSV)")
    p_diag.add_argument("--s", type=int, required=True)
    p_diag.add_argument("--k", type=int, required=True)
    p_diag.add_argument("--eta", type=float, default=0.1)
    p_diag.add_argument("--a-const", type=float, default=0.05)
    p_diag.add_argument("--c-const", type=float, default=0.05)
    p_diag.add_argument("--b-const", type=float, default=0.05)
    p_diag.set_defaults(handler=_cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.handler(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RifleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(payload, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
