"""Truncated Rayleigh flow (Rifle) for the leading sparse generalized eigenvector.

One iteration ascends the generalized Rayleigh quotient x^T A x / x^T B x
through the preconditioned map C = I + (eta/rho) (A - rho B), then hard
truncates to the k largest-magnitude coordinates and renormalizes.  The
iterate keeps unit Euclidean norm and at most k nonzeros throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import (
    DegenerateDenominator,
    NonFiniteIterate,
    ZeroMatrix,
    ZeroUpdate,
    ZeroVector,
)
from .linalg import IndexSet, MatrixPair, SymMatrix, as_vector
from .rng import RngState

_DENOM_RTOL = 1e-12
_UPDATE_FLOOR = 1e-14


@dataclass(frozen=True)
class RifleConfig:
    """Solver knobs.

    eta=None selects the automatic step size.  init=None draws a seeded
    standard-normal start (normalized); an explicit init is normalized if
    needed.  tol is the stopping threshold on 1 - |v_t . v_{t-1}|.
    """

    k: int
    eta: Optional[float] = None
    max_iter: int = 2000
    tol: float = 1e-10
    init: Optional[np.ndarray] = None
    seed: int = 0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.eta is not None and not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


class TrajectoryPoint(NamedTuple):
    rho: float
    support: IndexSet
    change: float


@dataclass(frozen=True)
class RifleResult:
    v: np.ndarray
    rho: float
    iterations: int
    converged: bool
    trajectory: Optional[Tuple[TrajectoryPoint, ...]] = None


@dataclass(frozen=True)
class WarmStartSchedule:
    """Strictly decreasing truncation cardinalities, coarsest first."""

    k_sequence: Tuple[int, ...]

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_sequence)
        object.__setattr__(self, "k_sequence", ks)
        if not ks:
            raise ValueError("schedule must be nonempty")
        if any(k < 1 for k in ks):
            raise ValueError("schedule entries must be at least 1")
        if any(b >= a for a, b in zip(ks, ks[1:])):
            raise ValueError(f"schedule must be strictly decreasing, got {ks}")


@dataclass(frozen=True)
class WarmStartResult:
    """Final stage result plus each coarse stage, coarsest first."""

    final: RifleResult
    stages: Tuple[RifleResult, ...]

    @property
    def v(self):
        return self.final.v

    @property
    def rho(self):
        return self.final.rho

    @property
    def iterations(self):
        return sum(stage.iterations for stage in self.stages)

    @property
    def converged(self):
        return self.final.converged


def rayleigh_quotient(pair: MatrixPair, v) -> float:
    """v^T A v / v^T B v, scale-invariant in v."""
    vec = as_vector(v)
    ss = float(vec @ vec)
    den = float(vec @ pair.b.values @ vec)
    if not den > _DENOM_RTOL * ss:
        raise DegenerateDenominator(f"v^T B v = {den:.3e} at squared norm {ss:.3e}")
    return float(vec @ pair.a.values @ vec) / den


def truncate_top_k(v, k: int) -> Tuple[np.ndarray, IndexSet]:
    """Zero all but the k largest-magnitude entries; no renormalization.

    Magnitude ties keep the smallest index.  Entries that are exactly zero
    are never selected, so the support can have fewer than k indices.
    """
    vec = as_vector(v)
    if not 1 <= k <= len(vec):
        raise ValueError(f"k={k} outside 1..{len(vec)}")
    order = np.argsort(-np.abs(vec), kind="stable")
    chosen = [int(i) for i in order[:k] if vec[i] != 0.0]
    support = IndexSet(chosen)
    out = np.zeros_like(vec)
    if chosen:
        out[support.as_array()] = vec[support.as_array()]
    return out, support


def rifle_step(pair: MatrixPair, v_prev, eta: float, k: int) -> Tuple[np.ndarray, float]:
    """One Rifle iteration: gradient-like update, truncate, renormalize.

    Returns (v_t, rho_{t-1}).  The update direction divides by rho, so a
    Rayleigh quotient within 1e-12 of zero (relative to ||A||_F) is
    treated as degenerate rather than amplified.
    """
    vec = as_vector(v_prev)
    nrm = float(np.linalg.norm(vec))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"v_prev must have unit norm, got {nrm}")
    rho = rayleigh_quotient(pair, vec)
    if abs(rho) <= _DENOM_RTOL * float(np.linalg.norm(pair.a.values)):
        raise DegenerateDenominator(f"rayleigh quotient {rho:.3e} too close to zero")
    grad = pair.a.values @ vec - rho * (pair.b.values @ vec)
    updated = vec + (eta / rho) * grad
    unorm = float(np.linalg.norm(updated))
    if unorm <= _UPDATE_FLOOR:
        raise ZeroUpdate(f"update norm {unorm:.3e}")
    truncated, _ = truncate_top_k(updated / unorm, k)
    tnorm = float(np.linalg.norm(truncated))
    if tnorm == 0.0:
        raise ZeroUpdate("all entries zeroed by truncation")
    return truncated / tnorm, rho


def _initial_vector(dim: int, config: RifleConfig) -> np.ndarray:
    if config.init is not None:
        vec = as_vector(config.init)
        if len(vec) != dim:
            raise ValueError(f"init has length {len(vec)}, expected {dim}")
    else:
        vec = RngState(config.seed, 0).normals(dim)
    nrm = float(np.linalg.norm(vec))
    if nrm == 0.0:
        raise ZeroVector("initial vector is zero")
    return vec / nrm


def rifle(pair: MatrixPair, config: RifleConfig) -> RifleResult:
    """Iterate rifle_step until 1 - |v_t . v_{t-1}| <= tol or max_iter."""
    dim = pair.dim
    if config.k > dim:
        raise ValueError(f"k={config.k} exceeds dimension {dim}")
    v = _initial_vector(dim, config)
    eta = config.eta if config.eta is not None else default_step_size(pair.b)
    track: list[TrajectoryPoint] = []
    converged = False
    iterations = 0
    for t in range(config.max_iter):
        v_new, rho = rifle_step(pair, v, eta, config.k)
        if not np.all(np.isfinite(v_new)):
            raise NonFiniteIterate(f"non-finite entries at iteration {t + 1}")
        change = 1.0 - abs(float(v_new @ v))
        if config.record_trajectory:
            support = IndexSet(np.nonzero(v_new)[0])
            track.append(TrajectoryPoint(rho, support, change))
        v = v_new
        iterations = t + 1
        if change <= config.tol:
            converged = True
            break
    return RifleResult(
        v=v,
        rho=rayleigh_quotient(pair, v),
        iterations=iterations,
        converged=converged,
        trajectory=tuple(track) if config.record_trajectory else None,
    )


def default_step_size(b: SymMatrix) -> float:
    """1 / (2 * 1.05 * lambda_hat) with lambda_hat a power-method estimate.

    200 iterations from a fixed-seed random start; the 5% inflation keeps
    eta * lambda_max(B) near 0.48, comfortably below the stability bound 1.
    """
    mat = b.values
    if float(np.linalg.norm(mat)) == 0.0:
        raise ZeroMatrix("cannot pick a step size for the zero matrix")
    for attempt in range(5):
        v = RngState(0x51EF, attempt).normals(b.dim)
        v /= np.linalg.norm(v)
        ok = True
        for _ in range(200):
            w = mat @ v
            nrm = float(np.linalg.norm(w))
            if nrm <= 1e-300:
                ok = False
                break
            v = w / nrm
        if ok:
            lam = abs(float(v @ mat @ v)) * 1.05
            return 1.0 / (2.0 * lam)
    raise ZeroMatrix("power method collapsed from every start")


def default_schedule(dim: int, k: int) -> WarmStartSchedule:
    """Coarse-to-fine cardinalities (8k, 4k, 2k, k), clipped at dim."""
    raw = [min(dim, 8 * k), min(dim, 4 * k), min(dim, 2 * k), k]
    seq = []
    for entry in raw:
        if not seq or entry < seq[-1]:
            seq.append(entry)
    return WarmStartSchedule(tuple(seq))


def rifle_warm_start(
    pair: MatrixPair, target: RifleConfig, schedule: Optional[WarmStartSchedule] = None
) -> WarmStartResult:
    """Run rifle along a decreasing-k schedule, chaining solutions as inits.

    The schedule must end at target.k; each stage's solution seeds the next
    stage.  Defaults to default_schedule(dim, target.k).
    """
    if schedule is None:
        schedule = default_schedule(pair.dim, target.k)
    if schedule.k_sequence[-1] != target.k:
        raise ValueError(
            f"schedule ends at {schedule.k_sequence[-1]}, target k is {target.k}"
        )
    stages = []
    init = _initial_vector(pair.dim, target)
    for k in schedule.k_sequence:
        stage = rifle(pair, replace(target, k=k, init=init))
        stages.append(stage)
        init = stage.v
    return WarmStartResult(final=stages[-1], stages=tuple(stages))
