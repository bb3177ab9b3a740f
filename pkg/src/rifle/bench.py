"""Experiment harness: seeded scenario replications, CV for k, CSV reports.

A single JSON spec drives everything.  All randomness flows from the spec's
seed through numbered substreams (two per replication: generation and test
data), so reports are byte-reproducible regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

from . import __version__
from .errors import DimMismatch, ParseError, RifleError, TooFewSamples
from .linalg import IndexSet, MatrixPair, SymMatrix, quadratic_form
from .oracle import restricted_leading_gevec
from .models import (
    LabeledDataset,
    PairedDataset,
    SlicedDataset,
    cca_build,
    cca_split,
    direction_error,
    fda_build,
    fda_classify,
    sir_build,
)
from .rng import RngState, rng_substream
from .simdata import gen_cca, gen_fda_binary, gen_fda_multiclass, gen_planted_gep, sample_mvn
from .solver import (
    RifleConfig,
    WarmStartSchedule,
    rayleigh_quotient,
    rifle,
    rifle_warm_start,
    truncate_top_k,
)

_SCENARIOS = ("fda-binary", "fda-multiclass", "cca", "sir", "planted", "custom-pair")


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one study; see from_dict for the JSON form."""

    scenario: str
    seed: int
    replications: int
    d: Optional[int] = None
    s: Optional[int] = None
    n: Optional[int] = None
    n_grid: Optional[Tuple[int, ...]] = None
    n_train: Optional[int] = None
    n_test: Optional[int] = None
    k: Optional[int] = None
    k_grid: Optional[Tuple[int, ...]] = None
    eta: Optional[float] = None
    warm_start: bool = True
    schedule: Optional[Tuple[int, ...]] = None
    schedule_policy: str = "default"
    folds: int = 5
    restarts: int = 1
    stability: bool = True
    lambda1: float = 1.0
    slices: int = 2
    a_csv: Optional[str] = None
    b_csv: Optional[str] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.scenario not in _SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {_SCENARIOS}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.k_grid is not None and len(self.k_grid) == 0:
            raise ValueError("k_grid must be nonempty")
        if self.n_grid is not None and len(self.n_grid) == 0:
            raise ValueError("n_grid must be nonempty")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        if self.schedule_policy not in ("default", "double"):
            raise ValueError("schedule_policy must be 'default' or 'double'")
        if self.schedule is not None and self.k_grid is not None:
            raise ValueError("an explicit schedule needs a fixed k; use schedule_policy with k_grid")
        needs = {
            "planted": ("d", "s"),
            "fda-binary": ("d", "n_train", "n_test"),
            "fda-multiclass": ("d", "n_train", "n_test"),
            "sir": ("d", "n_train", "n_test"),
            "cca": ("d",),
            "custom-pair": ("a_csv", "b_csv", "k"),
        }[self.scenario]
        for name in needs:
            if getattr(self, name) is None:
                raise ValueError(f"scenario {self.scenario} requires field {name!r}")
        if self.scenario == "cca" and self.n is None and self.n_grid is None:
            raise ValueError("cca scenario requires n or n_grid")
        if self.scenario != "planted" and self.k is None and self.k_grid is None:
            if self.scenario != "custom-pair":
                raise ValueError(f"scenario {self.scenario} requires k or k_grid")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        coerced = dict(raw)
        for name in ("n_grid", "k_grid", "schedule"):
            if coerced.get(name) is not None:
                coerced[name] = tuple(int(v) for v in coerced[name])
        return cls(**coerced)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentSpec":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: spec must be a JSON object")
        return cls.from_dict(raw)

    def canonical(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def spec_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def read_matrix_csv(path: str) -> np.ndarray:
    """Headerless comma-separated matrix; errors carry the 1-based row number."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            cells = text.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(f"{path}: row {lineno} has {len(cells)} cells, expected {width}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows)


def load_pair_csv(path_a: str, path_b: str) -> MatrixPair:
    """Load a pencil from two square CSV matrices (symmetrized on load)."""
    a = read_matrix_csv(path_a)
    b = read_matrix_csv(path_b)
    for path, mat in ((path_a, a), (path_b, b)):
        if mat.shape[0] != mat.shape[1]:
            raise DimMismatch(f"{path}: matrix is {mat.shape[0]}x{mat.shape[1]}, not square")
    if a.shape != b.shape:
        raise DimMismatch(f"pencil dims differ: {a.shape[0]} vs {b.shape[0]}")
    return MatrixPair(SymMatrix(a), SymMatrix(b))


@dataclass(frozen=True)
class CVResult:
    k_grid: Tuple[int, ...]
    fold_scores: dict
    mean_scores: dict
    selected: int
    higher_is_better: bool
    fold_supports: dict


def _stratified_folds(labels: np.ndarray, folds: int, rng: RngState) -> np.ndarray:
    """Fold id per row; each class is spread round-robin after a shuffle."""
    assign = np.empty(len(labels), dtype=int)
    for c in range(int(labels.max()) + 1):
        rows = np.flatnonzero(labels == c)
        shuffled = rows[rng.permutation(len(rows))]
        assign[shuffled] = np.arange(len(rows)) % folds
    return assign


def _spectral_init(pair: MatrixPair, k: int) -> np.ndarray:
    """Deterministic init: leading eigenvector of the numerator, truncated to k.

    For block-structured numerators the k largest entries can concentrate on
    a block where the quadratic form vanishes, which would make the first
    Rayleigh quotient degenerate; in that case the truncation level is
    doubled until the quotient is usable (at full dimension it always is
    when the numerator has a positive leading eigenvalue).
    """
    lead = np.linalg.eigh(pair.a.values)[1][:, -1]
    floor = 1e-12 * float(np.linalg.norm(pair.a.values))
    level = k
    while True:
        v0, _ = truncate_top_k(lead, min(level, pair.dim))
        v0 = v0 / np.linalg.norm(v0)
        if abs(quadratic_form(pair.a, v0)) > floor or level >= pair.dim:
            return v0
        level = min(2 * level, pair.dim)


def _policy_schedule(policy: str, k: int, dim: int) -> Optional[Tuple[int, ...]]:
    """Stage sequence implied by a named policy for truncation level k."""
    if policy == "double":
        first = min(2 * k, dim)
        return (first, k) if first > k else (k,)
    return None


def _fit_direction(pair: MatrixPair, k: int, eta, rng: RngState, warm: bool, schedule,
                   restarts: int = 1, policy: str = "default"):
    """Best-of-portfolio fit: one spectral init plus `restarts` random inits.

    Candidates that fail numerically are skipped; the survivor with the
    largest final Rayleigh quotient wins.  Random inits are drawn from rng
    in a fixed order so the fit is a pure function of (pair, rng state).
    """
    inits = [_spectral_init(pair, k)]
    inits.extend(rng.normals(pair.dim) for _ in range(restarts))
    if schedule is None:
        schedule = _policy_schedule(policy, k, pair.dim)
    sched = WarmStartSchedule(schedule) if schedule is not None else None
    best = None
    failure = None
    for init in inits:
        config = RifleConfig(k=k, eta=eta, init=init)
        try:
            if warm:
                result = rifle_warm_start(pair, config, sched)
            else:
                result = rifle(pair, config)
        except RifleError as exc:
            failure = exc
            continue
        if best is None or result.rho > best.rho:
            best = result
    if best is None:
        raise failure
    return best


def cross_validate_k(
    data,
    kind: str,
    k_grid,
    rng: RngState,
    folds: int = 5,
    eta: Optional[float] = None,
    warm: bool = True,
    schedule=None,
    slices: int = 2,
    restarts: int = 1,
    schedule_policy: str = "default",
) -> CVResult:
    """Pick k by 5-fold CV: misclassification rate down, held-out correlation up.

    kind is one of "fda", "sir" (LabeledDataset, stratified folds) or "cca"
    (PairedDataset, plain folds).  Fold assignment and every fit's random
    init consume the supplied rng in a fixed order, so the selection is a
    pure function of (data, k_grid, rng state).
    """
    grid = tuple(int(k) for k in k_grid)
    if not grid:
        raise ValueError("k_grid must be nonempty")
    if kind not in ("fda", "sir", "cca"):
        raise ValueError(f"unknown cv kind {kind!r}")
    n = data.n
    if n < folds:
        raise TooFewSamples(f"{n} samples for {folds} folds")
    higher = kind == "cca"
    if kind == "cca":
        perm = rng.permutation(n)
        assign = np.empty(n, dtype=int)
        assign[perm] = np.arange(n) % folds
    else:
        assign = _stratified_folds(data.labels, folds, rng)
    fold_scores = {k: [] for k in grid}
    fold_supports = {k: [] for k in grid}
    for k in sorted(set(grid)):
        for j in range(folds):
            train_rows = np.flatnonzero(assign != j)
            held_rows = np.flatnonzero(assign == j)
            if kind == "cca":
                train = PairedDataset(data.x[train_rows], data.y[train_rows])
                problem = cca_build(train)
                result = _fit_direction(problem.pair, k, eta, rng, warm, schedule,
                                        restarts, schedule_policy)
                split = cca_split(result.v, problem.meta)
                hx = data.x[held_rows] - data.x[held_rows].mean(axis=0)
                hy = data.y[held_rows] - data.y[held_rows].mean(axis=0)
                sxy = hx.T @ hy / len(held_rows)
                score = abs(float(split.x @ sxy @ split.y))
            else:
                train = LabeledDataset(data.x[train_rows], data.labels[train_rows])
                if kind == "fda":
                    problem = fda_build(train)
                else:
                    sliced = SlicedDataset(train.x, train.labels, slices)
                    problem = sir_build(sliced)
                result = _fit_direction(problem.pair, k, eta, rng, warm, schedule,
                                        restarts, schedule_policy)
                predicted = fda_classify(result.v, train, data.x[held_rows])
                score = float(np.mean(predicted != data.labels[held_rows]))
            fold_scores[k].append(score)
            fold_supports[k].append(tuple(int(i) for i in np.flatnonzero(result.v)))
    mean_scores = {k: float(np.mean(fold_scores[k])) for k in grid}
    selected = None
    for k in sorted(set(grid)):
        if selected is None:
            selected = k
        elif higher and mean_scores[k] > mean_scores[selected]:
            selected = k
        elif not higher and mean_scores[k] < mean_scores[selected]:
            selected = k
    return CVResult(
        k_grid=grid,
        fold_scores={k: tuple(v) for k, v in fold_scores.items()},
        mean_scores=mean_scores,
        selected=selected,
        higher_is_better=higher,
        fold_supports={k: tuple(v) for k, v in fold_supports.items()},
    )


_COLUMNS = {
    "planted": (
        "replicate", "n", "selected_k", "direction_error", "rho",
        "iterations", "converged", "nnz", "status", "error",
    ),
    "cca": (
        "replicate", "n", "scaled_n", "selected_k", "err_x", "err_y",
        "direction_error", "rho", "iterations", "nnz", "status", "error",
    ),
    "fda": (
        "replicate", "n", "selected_k", "test_errors", "test_error_rate",
        "oracle_errors", "ablation_errors", "direction_error", "rho",
        "iterations", "nnz", "status", "error",
    ),
    "sir": (
        "replicate", "n", "selected_k", "test_errors", "test_error_rate",
        "direction_error", "rho", "iterations", "nnz", "status", "error",
    ),
    "custom-pair": (
        "replicate", "n", "selected_k", "rho", "iterations", "converged",
        "nnz", "status", "error",
    ),
}


def _columns_for(scenario: str):
    if scenario.startswith("fda"):
        return _COLUMNS["fda"]
    return _COLUMNS[scenario]


def _solve(spec: ExperimentSpec, pair: MatrixPair, k: int, rng: RngState):
    return _fit_direction(pair, k, spec.eta, rng, spec.warm_start, spec.schedule,
                          spec.restarts, spec.schedule_policy)


def _select_k(spec: ExperimentSpec, data, kind: str, rng: RngState):
    """Returns (k, CVResult or None); CV runs only when a k_grid is given."""
    if spec.k_grid is not None:
        cv = cross_validate_k(
            data,
            kind,
            spec.k_grid,
            rng,
            folds=spec.folds,
            eta=spec.eta,
            warm=spec.warm_start,
            schedule=spec.schedule,
            slices=spec.slices,
            restarts=spec.restarts,
            schedule_policy=spec.schedule_policy,
        )
        return cv.selected, cv
    return int(spec.k), None


def _stability_refit(pair: MatrixPair, v_full: np.ndarray, cv: CVResult, k: int) -> np.ndarray:
    """Vote on support coordinates across CV fold fits, then refit exactly.

    Each fold fit at the selected k casts one vote per support coordinate,
    as does the full-data fit.  The k coordinates with the most votes (ties
    broken by the full fit's magnitudes, then by index) form the final
    support, on which the restricted pencil is solved exactly.
    """
    votes = np.zeros(pair.dim)
    for support in cv.fold_supports[k]:
        votes[list(support)] += 1.0
    votes[np.flatnonzero(v_full)] += 1.0
    order = np.lexsort((np.arange(pair.dim), -np.abs(v_full), -votes))
    chosen = IndexSet([int(i) for i in order[:k]])
    return restricted_leading_gevec(pair, chosen).y


def _balanced_test_set(scenario, n_test: int, rng: RngState):
    """Equal per-class test draws (n_test // K each) from the population."""
    k = scenario.class_means.shape[0]
    per = max(1, n_test // k)
    blocks = [sample_mvn(rng, scenario.class_means[c], scenario.sigma, per) for c in range(k)]
    return np.vstack(blocks), np.repeat(np.arange(k), per)


def _replicate_row(spec: ExperimentSpec, index: int, n_value: Optional[int]) -> dict:
    """Run one replication; returns a row dict (status ok) or raises."""
    gen_rng = rng_substream(spec.seed, 2 * index)
    test_rng = rng_substream(spec.seed, 2 * index + 1)
    row = {"replicate": index, "status": "ok", "error": "", "n": n_value}
    scenario_kind = spec.scenario
    if scenario_kind == "planted":
        pair, truth = gen_planted_gep(spec.d, spec.s, spec.lambda1, gen_rng)
        k = int(spec.k) if spec.k is not None else int(spec.s)
        result = _solve(spec, pair, k, gen_rng)
        row.update(
            selected_k=k,
            direction_error=direction_error(result.v, truth),
            rho=result.rho,
            iterations=result.iterations,
            converged=result.converged,
            nnz=int(np.count_nonzero(result.v)),
            n=None,
        )
    elif scenario_kind in ("fda-binary", "fda-multiclass"):
        gen = gen_fda_binary if scenario_kind == "fda-binary" else gen_fda_multiclass
        classes = 2 if scenario_kind == "fda-binary" else 4
        scenario = gen(spec.d, max(1, spec.n_train // classes), gen_rng)
        data = scenario.data
        k, cv = _select_k(spec, data, "fda", gen_rng)
        problem = fda_build(data)
        result = _solve(spec, problem.pair, k, gen_rng)
        v = result.v
        rho = result.rho
        if cv is not None and spec.stability:
            v = _stability_refit(problem.pair, result.v, cv, k)
            rho = rayleigh_quotient(problem.pair, v)
        test_x, test_labels = _balanced_test_set(scenario, spec.n_test, test_rng)
        predicted = fda_classify(v, data, test_x)
        oracle_predicted = fda_classify(scenario.v_star, data, test_x)
        ablation_pair = fda_build(data, diagonal_within=True).pair
        ablation = _solve(spec, ablation_pair, k, gen_rng)
        ablation_predicted = fda_classify(ablation.v, data, test_x)
        row.update(
            n=data.n,
            selected_k=k,
            test_errors=int(np.sum(predicted != test_labels)),
            test_error_rate=float(np.mean(predicted != test_labels)),
            oracle_errors=int(np.sum(oracle_predicted != test_labels)),
            ablation_errors=int(np.sum(ablation_predicted != test_labels)),
            direction_error=direction_error(v, scenario.v_star),
            rho=rho,
            iterations=result.iterations,
            nnz=int(np.count_nonzero(v)),
        )
    elif scenario_kind == "cca":
        scenario = gen_cca(spec.d, int(n_value), gen_rng)
        problem = cca_build(scenario.data)
        k, cv = _select_k(spec, scenario.data, "cca", gen_rng)
        result = _solve(spec, problem.pair, k, gen_rng)
        v = result.v
        rho = result.rho
        if cv is not None and spec.stability:
            v = _stability_refit(problem.pair, result.v, cv, k)
            rho = rayleigh_quotient(problem.pair, v)
        split = cca_split(v, problem.meta)
        err_x = 2.0 if split.zero_x else direction_error(split.x, scenario.vx_star)
        err_y = 2.0 if split.zero_y else direction_error(split.y, scenario.vy_star)
        s_total = int(np.count_nonzero(scenario.vx_star) + np.count_nonzero(scenario.vy_star))
        scaled = float(n_value) / (s_total * math.log(spec.d))
        row.update(
            selected_k=k,
            err_x=err_x,
            err_y=err_y,
            direction_error=0.5 * (err_x + err_y),
            rho=rho,
            iterations=result.iterations,
            nnz=int(np.count_nonzero(v)),
            scaled_n=scaled,
        )
    elif scenario_kind == "sir":
        scenario = gen_fda_binary(spec.d, max(1, spec.n_train // 2), gen_rng)
        data = scenario.data
        k, cv = _select_k(spec, data, "sir", gen_rng)
        sliced = SlicedDataset(data.x, data.labels, spec.slices)
        problem = sir_build(sliced)
        result = _solve(spec, problem.pair, k, gen_rng)
        v = result.v
        rho = result.rho
        if cv is not None and spec.stability:
            v = _stability_refit(problem.pair, result.v, cv, k)
            rho = rayleigh_quotient(problem.pair, v)
        test_x, test_labels = _balanced_test_set(scenario, spec.n_test, test_rng)
        predicted = fda_classify(v, data, test_x)
        row.update(
            n=data.n,
            selected_k=k,
            test_errors=int(np.sum(predicted != test_labels)),
            test_error_rate=float(np.mean(predicted != test_labels)),
            direction_error=direction_error(v, scenario.v_star),
            rho=rho,
            iterations=result.iterations,
            nnz=int(np.count_nonzero(v)),
        )
    elif scenario_kind == "custom-pair":
        pair = load_pair_csv(spec.a_csv, spec.b_csv)
        result = _solve(spec, pair, int(spec.k), gen_rng)
        row.update(
            selected_k=int(spec.k),
            rho=result.rho,
            iterations=result.iterations,
            converged=result.converged,
            nnz=int(np.count_nonzero(result.v)),
            n=None,
        )
    else:  # pragma: no cover - scenario validated at construction
        raise ValueError(scenario_kind)
    return row


def _task(args):
    spec, index, n_value = args
    try:
        return index, _replicate_row(spec, index, n_value)
    except RifleError as exc:
        return index, {
            "replicate": index,
            "n": n_value,
            "status": "error",
            "error": f"{type(exc).__name__}: {exc}",
        }


def _worker_count(tasks: int) -> int:
    env = os.environ.get("RIFLE_THREADS")
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"RIFLE_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise ValueError("RIFLE_THREADS must be at least 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, tasks))


@dataclass(frozen=True)
class ExperimentReport:
    columns: Tuple[str, ...]
    rows: Tuple[dict, ...]
    aggregates: dict
    spec_hash: str
    seed: int
    version: str
    n_failed: int


def _format_cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _aggregate(columns, rows) -> dict:
    out = {}
    good = [r for r in rows if r.get("status") == "ok"]
    for col in columns:
        if col in ("replicate", "status", "error"):
            continue
        values = [r[col] for r in good if isinstance(r.get(col), (int, float, np.integer, np.floating)) and not isinstance(r.get(col), bool)]
        if not values:
            continue
        arr = np.asarray(values, dtype=float)
        mean = float(arr.mean())
        se = float(arr.std(ddof=0) / math.sqrt(len(arr))) if len(arr) > 0 else 0.0
        out[col] = {"mean": mean, "se": se, "count": len(arr)}
    return out


def run_experiment(spec: ExperimentSpec, out_dir: Optional[str] = None) -> ExperimentReport:
    """Run every replication (optionally across a worker pool) and report.

    Each task owns substreams (2i, 2i+1) of the spec seed.  Failure in one
    replication becomes a status=error row instead of aborting the study.
    Results are ordered by task index, so output does not depend on worker
    scheduling.  out_dir (or spec.out) receives rows.csv and summary.json.
    """
    grid = spec.n_grid if spec.n_grid is not None else (spec.n,)
    tasks = []
    for g, n_value in enumerate(grid):
        for rep in range(spec.replications):
            tasks.append((spec, g * spec.replications + rep, n_value))
    workers = _worker_count(len(tasks))
    results = {}
    if workers == 1:
        for args in tasks:
            index, row = _task(args)
            results[index] = row
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(_task, tasks):
                results[index] = row
    columns = _columns_for(spec.scenario)
    rows = tuple(results[i] for i in sorted(results))
    n_failed = sum(1 for r in rows if r["status"] != "ok")
    report = ExperimentReport(
        columns=columns,
        rows=rows,
        aggregates=_aggregate(columns, rows),
        spec_hash=spec.spec_hash(),
        seed=spec.seed,
        version=__version__,
        n_failed=n_failed,
    )
    target = out_dir if out_dir is not None else spec.out
    if target is not None:
        write_report(report, spec, target)
    return report


def write_report(report: ExperimentReport, spec: ExperimentSpec, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    rows_path = os.path.join(out_dir, "rows.csv")
    with open(rows_path, "w") as fh:
        fh.write(",".join(report.columns) + "\n")
        for row in report.rows:
            fh.write(",".join(_format_cell(row.get(col)) for col in report.columns) + "\n")
    summary = {
        "spec": spec.canonical(),
        "spec_hash": report.spec_hash,
        "version": report.version,
        "seed": report.seed,
        "replications": spec.replications,
        "n_rows": len(report.rows),
        "n_failed": report.n_failed,
        "aggregates": report.aggregates,
        "rows_file": "rows.csv",
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
