"""Dense symmetric linear algebra built from scratch on numpy arrays.

The rest of the package never calls an opaque eigensolver for its core
results: factorizations and eigendecompositions here are hand-rolled
(column Cholesky, cyclic Jacobi) so every number is reproducible from
elementary operations.  Matrices are small by design; clarity wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, IndexOutOfRange, NoConvergence, NotPositiveDefinite

# Relative floor below which a Cholesky pivot counts as non-positive.
_PIVOT_RTOL = 1e-12
# Jacobi stops once the off-diagonal Frobenius mass falls below this
# fraction of the total Frobenius norm.
_JACOBI_RTOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


def as_vector(x) -> np.ndarray:
    """Validate and return a finite 1-d float array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


class SymMatrix:
    """A real symmetric matrix.

    The constructor symmetrizes its input as (m + m^T)/2 and sets
    ``asym_warning`` when symmetrization moved any entry by more than
    1e-12, i.e. when max |m - m^T| / 2 exceeds that.  ``values`` is
    read-only.
    """

    __slots__ = ("values", "asym_warning")

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimMismatch(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] == 0:
            raise ValueError("matrix must have positive dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        dev = float(np.abs(arr - arr.T).max())
        sym = (arr + arr.T) / 2.0
        sym.flags.writeable = False
        self.values = sym
        self.asym_warning = bool(dev / 2.0 > 1e-12)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __repr__(self):
        return f"SymMatrix(dim={self.dim}, asym_warning={self.asym_warning})"


def identity(d: int) -> SymMatrix:
    return SymMatrix(np.eye(d))


class IndexSet:
    """A duplicate-free set of nonnegative coordinate indices, kept sorted."""

    __slots__ = ("indices",)

    def __init__(self, indices):
        idx = tuple(sorted(int(i) for i in indices))
        if idx and idx[0] < 0:
            raise IndexOutOfRange(f"negative index {idx[0]}")
        if any(b == a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"duplicate indices in {idx}")
        self.indices = idx

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __eq__(self, other):
        return isinstance(other, IndexSet) and self.indices == other.indices

    def __hash__(self):
        return hash(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    def __repr__(self):
        return f"IndexSet({list(self.indices)})"


@dataclass(frozen=True)
class MatrixPair:
    """A matrix pencil (a, b) of equal dimension; b plays the metric role."""

    a: SymMatrix
    b: SymMatrix

    def __post_init__(self):
        if self.a.dim != self.b.dim:
            raise DimMismatch(f"pencil dims differ: {self.a.dim} vs {self.b.dim}")

    @property
    def dim(self) -> int:
        return self.a.dim


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor with lower @ lower.T equal to the input."""

    lower: np.ndarray


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in nonincreasing order; eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def cholesky(m: SymMatrix) -> CholeskyFactor:
    """Column-by-column Cholesky factorization of a positive definite matrix.

    Raises NotPositiveDefinite as soon as a pivot falls at or below
    1e-12 times the largest diagonal entry.
    """
    a = m.values
    d = m.dim
    floor = _PIVOT_RTOL * max(float(a.diagonal().max()), 0.0)
    low = np.zeros((d, d))
    for j in range(d):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= floor:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at column {j} (floor {floor:.3e})")
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < d:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / ljj
    return CholeskyFactor(low)


def solve_lower(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution: solve lower @ x = rhs (vector or matrix rhs)."""
    n = lower.shape[0]
    x = np.array(rhs, dtype=float)
    for i in range(n):
        if i:
            x[i] -= lower[i, :i] @ x[:i]
        x[i] /= lower[i, i]
    return x


def solve_lower_t(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Back substitution: solve lower.T @ x = rhs (vector or matrix rhs)."""
    n = lower.shape[0]
    x = np.array(rhs, dtype=float)
    for i in reversed(range(n)):
        if i + 1 < n:
            x[i] -= lower[i + 1 :, i] @ x[i + 1 :]
        x[i] /= lower[i, i]
    return x


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties go to the earliest such entry, which argmax already guarantees.
    """
    out = vectors.copy()
    for j in range(out.shape[1]):
        lead = int(np.argmax(np.abs(out[:, j])))
        if out[lead, j] < 0:
            out[:, j] = -out[:, j]
    return out


def sym_eig(m: SymMatrix) -> EigenDecomposition:
    """Full eigendecomposition by cyclic Jacobi rotations.

    Sweeps annihilate every off-diagonal entry in row-major order until the
    off-diagonal Frobenius mass drops below 1e-12 of the matrix norm.
    Deterministic: no pivot search, no randomness.
    """
    a = m.values.copy()
    d = m.dim
    q = np.eye(d)
    fnorm = float(np.linalg.norm(a))
    tol = _JACOBI_RTOL * fnorm

    offmask = ~np.eye(d, dtype=bool)

    def offnorm():
        # summed directly over off-diagonal entries; subtracting the diagonal
        # mass from the total cancels catastrophically near convergence
        return float(np.sqrt(np.sum(a[offmask] ** 2)))

    if d > 1 and fnorm > 0.0:
        converged = False
        for _ in range(_JACOBI_MAX_SWEEPS):
            if offnorm() <= tol:
                converged = True
                break
            for p in range(d - 1):
                for r in range(p + 1, d):
                    apr = a[p, r]
                    if apr == 0.0:
                        continue
                    theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                    sign = 1.0 if theta >= 0 else -1.0
                    if abs(theta) > 1e8:
                        # asymptotic tangent; theta*theta would lose the +1
                        # anyway and can overflow for near-converged pivots
                        t = 0.5 / theta
                    else:
                        t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    col_p, col_r = a[:, p].copy(), a[:, r].copy()
                    a[:, p] = c * col_p - s * col_r
                    a[:, r] = s * col_p + c * col_r
                    row_p, row_r = a[p, :].copy(), a[r, :].copy()
                    a[p, :] = c * row_p - s * row_r
                    a[r, :] = s * row_p + c * row_r
                    a[p, r] = 0.0
                    a[r, p] = 0.0
                    q_p, q_r = q[:, p].copy(), q[:, r].copy()
                    q[:, p] = c * q_p - s * q_r
                    q[:, r] = s * q_p + c * q_r
        if not converged and offnorm() > tol:
            raise NoConvergence(f"jacobi off-diagonal norm {offnorm():.3e} after {_JACOBI_MAX_SWEEPS} sweeps")

    eigvals = a.diagonal().copy()
    order = np.argsort(-eigvals, kind="stable")
    return EigenDecomposition(eigvals[order], _canonical_signs(q[:, order]))


def gen_eig(pair: MatrixPair) -> EigenDecomposition:
    """Generalized eigendecomposition of (a, b) with b positive definite.

    Whitens through the Cholesky factor of b, runs Jacobi on the
    symmetric reduced matrix, and maps eigenvectors back; each returned
    column w satisfies w^T b w = 1.
    """
    low = cholesky(pair.b).lower
    half = solve_lower(low, pair.a.values)
    reduced = SymMatrix(solve_lower(low, half.T))
    inner = sym_eig(reduced)
    vectors = solve_lower_t(low, inner.eigenvectors)
    return EigenDecomposition(inner.eigenvalues, _canonical_signs(vectors))


def quadratic_form(m: SymMatrix, v) -> float:
    """v^T m v."""
    vec = as_vector(v)
    if vec.shape[0] != m.dim:
        raise DimMismatch(f"vector length {vec.shape[0]} vs matrix dim {m.dim}")
    return float(vec @ m.values @ vec)


def restrict(m: SymMatrix, f: IndexSet) -> SymMatrix:
    """Principal submatrix of m on the coordinates in f."""
    if len(f) == 0:
        raise ValueError("cannot restrict to an empty index set")
    if f.indices[-1] >= m.dim:
        raise IndexOutOfRange(f"index {f.indices[-1]} outside dimension {m.dim}")
    idx = f.as_array()
    return SymMatrix(m.values[np.ix_(idx, idx)])


def restrict_pair(pair: MatrixPair, f: IndexSet) -> MatrixPair:
    return MatrixPair(restrict(pair.a, f), restrict(pair.b, f))


def embed(values, f: IndexSet, dim: int) -> np.ndarray:
    """Scatter a coefficient vector on f back into R^dim."""
    vec = as_vector(values)
    if len(vec) != len(f):
        raise DimMismatch(f"{len(vec)} values for {len(f)} indices")
    if len(f) and f.indices[-1] >= dim:
        raise IndexOutOfRange(f"index {f.indices[-1]} outside dimension {dim}")
    out = np.zeros(dim)
    out[f.as_array()] = vec
    return out


def spectral_norm(m: SymMatrix) -> float:
    """Largest absolute eigenvalue."""
    return float(np.abs(sym_eig(m).eigenvalues).max())
