"""Exact small-scale ground truth and perturbation diagnostics.

Everything here is brute force on purpose: supports are enumerated, the
Crawford number is scanned over directions, and spectral quantities come
from the in-house Jacobi eigensolver.  These routines exist to certify the
fast solver and the theory-side bounds on problems small enough to check
exhaustively; enumeration caps keep them honest about that scope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from .errors import AllSupportsSingular, NotPositiveDefinite, TooLarge, TooSmall, ZeroGap
from .linalg import (
    IndexSet,
    MatrixPair,
    SymMatrix,
    cholesky,
    embed,
    gen_eig,
    restrict_pair,
    spectral_norm,
    sym_eig,
)

# Brute-force guardrails: supports enumerated only below this count, and
# exhaustive_sparse_gep additionally refuses dimensions above 20.  The
# sparse spectral norm scan prunes aggressively, so it affords a larger cap.
_MAX_SUPPORTS = 200_000
_MAX_SCAN_SUPPORTS = 5_000_000
_MAX_EXHAUSTIVE_DIM = 20
_CRAWFORD_GRID = 4096


@dataclass(frozen=True)
class SparseGEPSolution:
    """Global maximizer of the Rayleigh quotient over s-sparse unit vectors."""

    v: np.ndarray
    support: IndexSet
    lam: float
    skipped: int


class RestrictedGevec(NamedTuple):
    """Leading restricted generalized eigenvector, in both normalizations.

    v has unit B-norm on the support and zeros elsewhere; y = v / ||v||_2.
    """

    v: np.ndarray
    y: np.ndarray


def _check_support_count(d: int, size: int):
    count = math.comb(d, size)
    if count > _MAX_SUPPORTS:
        raise TooLarge(f"C({d},{size}) = {count} supports exceeds cap {_MAX_SUPPORTS}")


def exhaustive_sparse_gep(pair: MatrixPair, s: int) -> SparseGEPSolution:
    """Enumerate every size-s support and take the best restricted eigenpair.

    Supports whose restricted B fails Cholesky are skipped and counted.
    Ties in the quotient keep the lexicographically first support.
    """
    d = pair.dim
    if not 1 <= s <= d:
        raise ValueError(f"s={s} outside 1..{d}")
    if d > _MAX_EXHAUSTIVE_DIM:
        raise TooLarge(f"dimension {d} exceeds exhaustive cap {_MAX_EXHAUSTIVE_DIM}")
    _check_support_count(d, s)
    best = None
    skipped = 0
    for f in itertools.combinations(range(d), s):
        fset = IndexSet(f)
        sub = restrict_pair(pair, fset)
        try:
            cholesky(sub.b)
        except NotPositiveDefinite:
            skipped += 1
            continue
        eig = gen_eig(sub)
        lam = float(eig.eigenvalues[0])
        if best is None or lam > best[0]:
            best = (lam, fset, eig.eigenvectors[:, 0])
    if best is None:
        raise AllSupportsSingular(f"all {math.comb(d, s)} supports had singular B")
    lam, fset, coeffs = best
    v = embed(coeffs, fset, d)
    v /= np.linalg.norm(v)
    return SparseGEPSolution(v=v, support=fset, lam=lam, skipped=skipped)


_COMB_CACHE: dict = {}


def _support_table(d: int, m: int) -> np.ndarray:
    """All size-m index subsets of range(d), one row each, cached."""
    key = (d, m)
    if key not in _COMB_CACHE:
        _COMB_CACHE.clear()
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(d), m)),
            dtype=np.int32,
            count=math.comb(d, m) * m,
        )
        _COMB_CACHE[key] = flat.reshape(-1, m)
    return _COMB_CACHE[key]


def sparse_spectral_norm(z: SymMatrix, s: int) -> float:
    """max over size-s supports of the restricted spectral norm.

    Equals the supremum of |u^T z u| over s-sparse unit vectors.  The
    restricted Frobenius norm upper-bounds the spectral norm on each
    support, so only supports whose Frobenius norm beats the best spectral
    value seen so far need an eigensolve; they are visited in decreasing
    Frobenius order.  Candidate batches go through the library eigensolver,
    and the winning support is confirmed with the in-house one.
    """
    if s < 1:
        raise ValueError(f"s must be at least 1, got {s}")
    d = z.dim
    m = min(s, d)
    count = math.comb(d, m)
    if count > _MAX_SCAN_SUPPORTS:
        raise TooLarge(f"C({d},{m}) = {count} supports exceeds cap {_MAX_SCAN_SUPPORTS}")
    vals = z.values
    if m == d:
        return spectral_norm(z)
    if m == 1:
        return float(np.abs(vals.diagonal()).max())
    combs = _support_table(d, m)
    sq = vals * vals
    iu0, iu1 = np.triu_indices(m, 1)
    fro2 = np.empty(count)
    chunk = 200_000
    for lo in range(0, count, chunk):
        c = combs[lo:lo + chunk]
        fro2[lo:lo + chunk] = (
            2.0 * sq[c[:, iu0], c[:, iu1]].sum(axis=1) + sq.diagonal()[c].sum(axis=1)
        )
    # Seed the bound with the top-Frobenius support, then scan survivors.
    seed = int(np.argmax(fro2))
    best = spectral_norm(SymMatrix(vals[np.ix_(combs[seed], combs[seed])]))
    best_support = combs[seed]
    alive = np.flatnonzero(fro2 > best * best)
    order = alive[np.argsort(-fro2[alive], kind="stable")]
    for lo in range(0, len(order), chunk):
        idx = order[lo:lo + chunk]
        if fro2[idx[0]] <= best * best:
            break
        idx = idx[fro2[idx] > best * best]
        if len(idx) == 0:
            continue
        c = combs[idx]
        w = np.linalg.eigvalsh(z.values[c[:, :, None], c[:, None, :]])
        cand = np.maximum(np.abs(w[:, 0]), np.abs(w[:, -1]))
        arg = int(np.argmax(cand))
        if cand[arg] > best:
            best = float(cand[arg])
            best_support = c[arg]
    return spectral_norm(SymMatrix(vals[np.ix_(best_support, best_support)]))


def _min_eig_grid(a: np.ndarray, b: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of cos(t) a + sin(t) b for each t, batched."""
    stack = np.cos(thetas)[:, None, None] * a + np.sin(thetas)[:, None, None] * b
    stack = (stack + np.swapaxes(stack, 1, 2)) / 2.0
    return np.linalg.eigvalsh(stack)[:, 0]


def _min_eig_exact(a: np.ndarray, b: np.ndarray, t: float) -> float:
    m = SymMatrix(np.cos(t) * a + np.sin(t) * b)
    return float(sym_eig(m).eigenvalues[-1])


def _min_eig_slope(a: np.ndarray, b: np.ndarray, t: float) -> float:
    """d/dt of the smallest eigenvalue, via its eigenvector."""
    m = SymMatrix(np.cos(t) * a + np.sin(t) * b)
    eig = sym_eig(m)
    q = eig.eigenvectors[:, -1]
    return float(q @ (-np.sin(t) * a + np.cos(t) * b) @ q)


def crawford_number(pair: MatrixPair) -> float:
    """min over unit v of sqrt((v^T A v)^2 + (v^T B v)^2).

    Scans 4096 directions t for the support function
    h(t) = lambda_min(cos(t) A + sin(t) B) of the joint numerical range,
    refines the best direction with one Newton step, and returns the
    largest h seen (clamped at 0 when the origin lies inside the range).
    Every evaluation is a valid lower bound, so the result approximates
    the true value from below within the refinement tolerance.
    """
    a, b = pair.a.values, pair.b.values
    thetas = np.linspace(0.0, 2.0 * np.pi, _CRAWFORD_GRID, endpoint=False)
    heights = _min_eig_grid(a, b, thetas)
    pick = int(np.argmax(heights))
    if heights[pick] <= 0.0:
        return 0.0
    t0 = float(thetas[pick])
    best = _min_eig_exact(a, b, t0)
    spacing = 2.0 * np.pi / _CRAWFORD_GRID
    delta = spacing / 16.0
    slope = _min_eig_slope(a, b, t0)
    curve = (_min_eig_slope(a, b, t0 + delta) - _min_eig_slope(a, b, t0 - delta)) / (2 * delta)
    if curve < 0.0:
        t1 = t0 - slope / curve
        if abs(t1 - t0) <= spacing:
            best = max(best, _min_eig_exact(a, b, t1))
    return max(best, 0.0)


def cr_inf(pair: MatrixPair, k_prime: int) -> float:
    """Smallest Crawford number over principal subpairs of size <= k_prime.

    Restricting to fewer coordinates shrinks the joint numerical range, so
    the infimum is attained at size exactly min(k_prime, d); only those
    supports are enumerated.
    """
    if k_prime < 1:
        raise ValueError(f"k_prime must be at least 1, got {k_prime}")
    d = pair.dim
    m = min(k_prime, d)
    _check_support_count(d, m)
    best = math.inf
    for f in itertools.combinations(range(d), m):
        value = crawford_number(restrict_pair(pair, IndexSet(f)))
        if value < best:
            best = value
    return best


def epsilon_k(e_a: SymMatrix, e_b: SymMatrix, k_prime: int) -> float:
    """sqrt(rho(E_A, k')^2 + rho(E_B, k')^2) with rho = sparse_spectral_norm."""
    return float(
        math.hypot(sparse_spectral_norm(e_a, k_prime), sparse_spectral_norm(e_b, k_prime))
    )


def eigengap(pair: MatrixPair, a: float) -> float:
    """min over j > 1 of (l1 - (1+a) lj) / (sqrt(1+l1^2) sqrt(1+(1-a)^2 lj^2))."""
    if not 0 <= a < 1:
        raise ValueError(f"a must lie in [0, 1), got {a}")
    if pair.dim < 2:
        raise TooSmall("eigengap needs at least two eigenvalues")
    lam = gen_eig(pair).eigenvalues
    l1 = lam[0]
    rest = lam[1:]
    scaled = (l1 - (1.0 + a) * rest) / (
        np.sqrt(1.0 + l1 * l1) * np.sqrt(1.0 + (1.0 - a) ** 2 * rest * rest)
    )
    return float(scaled.min())


def chordal_distance(x: float, y: float) -> float:
    """|x - y| / (sqrt(1+x^2) sqrt(1+y^2)), the chordal metric on eigenvalues."""
    return abs(x - y) / (math.sqrt(1.0 + x * x) * math.sqrt(1.0 + y * y))


@dataclass(frozen=True)
class TheoremQuantities:
    """Constants controlling the contraction and statistical-error bounds.

    gap_violated flags delta_lambda <= eps_k / cr_k, under which the error
    bound does not apply; it is reported rather than raised.  The constants
    a, b, c are user-supplied assumption levels (b is recorded only).
    """

    k_prime: int
    cr_k: float
    eps_k: float
    delta_lambda: float
    gamma: float
    omega_k: float
    theta: float
    nu: float
    a: float
    b: float
    c: float
    c_lower: float
    c_upper: float
    kappa_b: float
    lambda1: float
    lambda2: float
    lambda_min_b: float
    lambda_max_b: float
    eta: float
    gap_violated: bool


def theorem1_quantities(
    pair: MatrixPair,
    perturb: Tuple[SymMatrix, SymMatrix],
    s: int,
    k: int,
    eta: float,
    a: float = 0.05,
    c: float = 0.05,
    b: float = 0.05,
) -> TheoremQuantities:
    """Evaluate the contraction/error constants for a perturbed pencil.

    pair is the unperturbed pencil, perturb the additive errors (E_A, E_B).
    Enumerated pieces (eps, cr) clamp k' = 2k + s at the dimension.
    """
    if not (0 <= a < 1 and 0 <= c < 1):
        raise ValueError("a and c must lie in [0, 1)")
    if s < 1 or k < 1:
        raise ValueError("s and k must be at least 1")
    if eta <= 0:
        raise ValueError("eta must be positive")
    e_a, e_b = perturb
    k_prime = 2 * k + s
    lam = gen_eig(pair).eigenvalues
    if len(lam) < 2:
        raise TooSmall("need at least two generalized eigenvalues")
    l1, l2 = float(lam[0]), float(lam[1])
    delta_lambda = eigengap(pair, a)
    gamma = (1.0 + a) * l2 / ((1.0 - a) * l1)
    eps = epsilon_k(e_a, e_b, k_prime)
    cr_k = cr_inf(pair, k_prime)
    omega = 2.0 * eps / (delta_lambda * cr_k)
    gap_violated = bool(delta_lambda <= eps / cr_k)
    b_eig = sym_eig(pair.b).eigenvalues
    lam_max_b, lam_min_b = float(b_eig[0]), float(b_eig[-1])
    if lam_min_b <= 0:
        raise NotPositiveDefinite("B must be positive definite")
    kappa = lam_max_b / lam_min_b
    c_lower = (1.0 - c) / (1.0 + c)
    c_upper = (1.0 + c) / (1.0 - c)
    theta = 1.0 - (1.0 - gamma) / (
        30.0 * (1.0 + c) * c_upper**2 * eta * lam_max_b * kappa**2 * (c_upper * kappa + gamma)
    )
    ratio = s / k
    nu = math.sqrt(1.0 + 2.0 * (math.sqrt(ratio) + ratio)) * math.sqrt(
        1.0 - ((1.0 + c) / 8.0) * eta * lam_min_b * (1.0 - gamma) / (c_upper * kappa + gamma)
    )
    return TheoremQuantities(
        k_prime=k_prime,
        cr_k=cr_k,
        eps_k=eps,
        delta_lambda=delta_lambda,
        gamma=gamma,
        omega_k=omega,
        theta=theta,
        nu=nu,
        a=a,
        b=b,
        c=c,
        c_lower=c_lower,
        c_upper=c_upper,
        kappa_b=kappa,
        lambda1=l1,
        lambda2=l2,
        lambda_min_b=lam_min_b,
        lambda_max_b=lam_max_b,
        eta=eta,
        gap_violated=gap_violated,
    )


def restricted_leading_gevec(pair: MatrixPair, f: IndexSet) -> RestrictedGevec:
    """Leading generalized eigenvector of the pencil restricted to f.

    Returns the full-dimensional embedding: v with v^T B v = 1 on the
    support, and its unit-norm companion y.
    """
    sub = restrict_pair(pair, f)
    eig = gen_eig(sub)
    v = embed(eig.eigenvectors[:, 0], f, pair.dim)
    return RestrictedGevec(v=v, y=v / np.linalg.norm(v))


def lemma3_bound(pair_true: MatrixPair, pair_hat: MatrixPair, f: IndexSet) -> float:
    """Perturbation bound for the restricted leading eigenvector direction.

    delta(F) / (gap_hat(F) * crawford(hat pair on F)), where delta combines
    the restricted spectral norms of the errors and gap_hat is the smallest
    chordal distance from the true leading eigenvalue to the non-leading
    perturbed eigenvalues on F.
    """
    if pair_true.dim != pair_hat.dim:
        raise ValueError("pencils must share a dimension")
    sub_true = restrict_pair(pair_true, f)
    sub_hat = restrict_pair(pair_hat, f)
    if len(f) < 2:
        raise ZeroGap("need at least two coordinates for a restricted gap")
    e_a = SymMatrix(sub_hat.a.values - sub_true.a.values)
    e_b = SymMatrix(sub_hat.b.values - sub_true.b.values)
    delta = math.hypot(spectral_norm(e_a), spectral_norm(e_b))
    l1 = float(gen_eig(sub_true).eigenvalues[0])
    hat_vals = gen_eig(sub_hat).eigenvalues[1:]
    gap_hat = min(chordal_distance(l1, float(v)) for v in hat_vals)
    if gap_hat <= 1e-14:
        raise ZeroGap(f"restricted chordal gap {gap_hat:.3e}")
    return delta / (gap_hat * crawford_number(sub_hat))
