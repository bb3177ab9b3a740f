"""Reductions from multivariate analysis problems to matrix pencils.

Discriminant analysis, canonical correlation, and sliced inverse
regression each pick out a leading generalized eigenvector of a pair of
covariance-style matrices; the builders here form those pairs from data.
All covariances are normalized by 1/n (not 1/(n-1)).  That convention
changes numbers and is relied on by the scatter identity
within + between == (1/n) X^T X for class-structured data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateClass, DimMismatch, EmptySlice, ZeroVector
from .linalg import MatrixPair, SymMatrix, as_vector


def _as_sample_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d sample matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"sample matrix must be nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample entries must be finite")
    out = arr.copy()
    out.flags.writeable = False
    return out


class LabeledDataset:
    """Samples with class ids 0..K-1; every class present, K >= 2.

    Single-sample classes are legal (their within-class scatter is zero).
    """

    __slots__ = ("x", "labels")

    def __init__(self, x, labels):
        self.x = _as_sample_matrix(x)
        lab = np.asarray(labels)
        if lab.ndim != 1 or lab.shape[0] != self.x.shape[0]:
            raise DegenerateClass(
                f"labels must be one per sample: {lab.shape} vs {self.x.shape[0]} rows"
            )
        if not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == lab.astype(int)):
                raise DegenerateClass("labels must be integers")
        lab = lab.astype(int)
        if lab.size == 0 or lab.min() < 0:
            raise DegenerateClass("labels must be nonnegative")
        k = int(lab.max()) + 1
        counts = np.bincount(lab, minlength=k)
        if k < 2:
            raise DegenerateClass("need at least two classes")
        if np.any(counts == 0):
            missing = int(np.flatnonzero(counts == 0)[0])
            raise DegenerateClass(f"class {missing} has no samples")
        lab = lab.copy()
        lab.flags.writeable = False
        self.labels = lab

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


class PairedDataset:
    """Two views of the same n samples."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        self.x = _as_sample_matrix(x)
        self.y = _as_sample_matrix(y)
        if self.x.shape[0] != self.y.shape[0]:
            raise DimMismatch(
                f"row counts differ: {self.x.shape[0]} vs {self.y.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]


class SlicedDataset:
    """Samples with a response to be grouped into H slices."""

    __slots__ = ("x", "response", "slices")

    def __init__(self, x, response, slices):
        self.x = _as_sample_matrix(x)
        resp = np.asarray(response, dtype=float)
        if resp.ndim != 1 or resp.shape[0] != self.x.shape[0]:
            raise ValueError("response must be one value per sample")
        if not np.all(np.isfinite(resp)):
            raise ValueError("response values must be finite")
        if int(slices) < 2:
            raise ValueError("need at least two slices")
        if self.x.shape[0] < int(slices):
            raise EmptySlice(f"{self.x.shape[0]} samples cannot fill {slices} slices")
        resp = resp.copy()
        resp.flags.writeable = False
        self.response = resp
        self.slices = int(slices)


@dataclass(frozen=True)
class ProblemMeta:
    """What a pencil encodes and how its coordinates map back to the data."""

    kind: str
    dx: Optional[int] = None
    dy: Optional[int] = None
    classes: Optional[int] = None
    slices: Optional[int] = None
    diagonal_within: bool = False


@dataclass(frozen=True)
class GEPProblem:
    pair: MatrixPair
    meta: ProblemMeta

    def __post_init__(self):
        if self.meta.kind == "cca" and self.pair.dim != self.meta.dx + self.meta.dy:
            raise DimMismatch(
                f"pencil dim {self.pair.dim} vs blocks {self.meta.dx}+{self.meta.dy}"
            )


def fda_build(data: LabeledDataset, diagonal_within: bool = False) -> GEPProblem:
    """Between-class / within-class scatter pencil.

    A = (1/n) sum_k n_k mean_k mean_k^T (uncentered between-class scatter),
    B = (1/n) sum_k sum_{i in k} (x_i - mean_k)(x_i - mean_k)^T.
    diagonal_within=True keeps only diag(B), an ablation that ignores
    feature correlations the way plain l1 discriminant analysis does.
    """
    n, d = data.x.shape
    k = data.n_classes
    between = np.zeros((d, d))
    within = np.zeros((d, d))
    for c in range(k):
        rows = data.x[data.labels == c]
        mean = rows.mean(axis=0)
        between += rows.shape[0] * np.outer(mean, mean)
        centered = rows - mean
        within += centered.T @ centered
    between /= n
    within /= n
    if diagonal_within:
        within = np.diag(within.diagonal())
    pair = MatrixPair(SymMatrix(between), SymMatrix(within))
    meta = ProblemMeta(kind="fda", classes=k, diagonal_within=diagonal_within)
    return GEPProblem(pair=pair, meta=meta)


def fda_classify(v, train: LabeledDataset, test_x) -> np.ndarray:
    """Nearest projected class centroid, ties to the smaller label."""
    vec = as_vector(v)
    if float(np.linalg.norm(vec)) == 0.0:
        raise ZeroVector("projection direction is zero")
    if len(vec) != train.dim:
        raise DimMismatch(f"direction length {len(vec)} vs {train.dim} features")
    test = _as_sample_matrix(test_x)
    if test.shape[1] != train.dim:
        raise DimMismatch(f"test has {test.shape[1]} features, train has {train.dim}")
    proj = train.x @ vec
    centroids = np.array(
        [proj[train.labels == c].mean() for c in range(train.n_classes)]
    )
    dist = np.abs(test @ vec[:, None] - centroids[None, :])
    # argmin returns the first minimum, which is the smaller label on ties
    return np.argmin(dist, axis=1)


def cca_build(data: PairedDataset) -> GEPProblem:
    """Cross-covariance pencil for the leading canonical direction pair.

    Columns are mean-centered before forming (1/n)-normalized covariances;
    A holds the cross-covariance off-diagonally, B the two view covariances.
    """
    n = data.n
    dx, dy = data.x.shape[1], data.y.shape[1]
    xc = data.x - data.x.mean(axis=0)
    yc = data.y - data.y.mean(axis=0)
    sx = xc.T @ xc / n
    sy = yc.T @ yc / n
    sxy = xc.T @ yc / n
    a = np.zeros((dx + dy, dx + dy))
    a[:dx, dx:] = sxy
    a[dx:, :dx] = sxy.T
    b = np.zeros((dx + dy, dx + dy))
    b[:dx, :dx] = sx
    b[dx:, dx:] = sy
    pair = MatrixPair(SymMatrix(a), SymMatrix(b))
    return GEPProblem(pair=pair, meta=ProblemMeta(kind="cca", dx=dx, dy=dy))


class SplitDirections(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    zero_x: bool
    zero_y: bool


def _normalize_half(half: np.ndarray):
    nrm = float(np.linalg.norm(half))
    if nrm == 0.0:
        return np.zeros_like(half), True
    unit = half / nrm
    lead = np.flatnonzero(unit)[0]
    if unit[lead] < 0:
        unit = -unit
    return unit, False


def cca_split(v, meta: ProblemMeta) -> SplitDirections:
    """Split a joint direction into unit-norm per-view directions.

    Each half is normalized with its first nonzero coordinate positive, so
    v and -v split identically; an all-zero half comes back flagged.
    """
    vec = as_vector(v)
    if meta.dx is None or meta.dy is None:
        raise ValueError("meta must carry the block sizes dx and dy")
    if len(vec) != meta.dx + meta.dy:
        raise DimMismatch(f"direction length {len(vec)} vs {meta.dx}+{meta.dy}")
    vx, zx = _normalize_half(vec[: meta.dx])
    vy, zy = _normalize_half(vec[meta.dx :])
    return SplitDirections(x=vx, y=vy, zero_x=zx, zero_y=zy)


def _slice_assignments(data: SlicedDataset) -> list:
    """Row indices per slice.

    A response with exactly H distinct values is treated as categorical and
    grouped by value (ascending).  Otherwise rows are ranked by response,
    ties broken by sample index, and cut into H nearly equal runs with the
    earlier slices taking the remainder.
    """
    resp = data.response
    h = data.slices
    distinct = np.unique(resp)
    if len(distinct) == h:
        return [np.flatnonzero(resp == value) for value in distinct]
    if len(distinct) < h:
        raise EmptySlice(f"{len(distinct)} distinct responses cannot fill {h} slices")
    order = np.argsort(resp, kind="stable")
    n = len(resp)
    base, extra = divmod(n, h)
    groups = []
    start = 0
    for j in range(h):
        size = base + (1 if j < extra else 0)
        groups.append(np.sort(order[start : start + size]))
        start += size
    return groups


def sir_build(data: SlicedDataset) -> GEPProblem:
    """Pencil whose leading eigenvector spans the central subspace estimate.

    A = Sigma_x - (1/n) sum_k n_k Sigma_{x,k} (the covariance of slice
    means), B = Sigma_x; all covariances 1/n-normalized and centered.
    """
    groups = _slice_assignments(data)
    if any(len(g) == 0 for g in groups):
        raise EmptySlice("a slice came up empty")
    n, d = data.x.shape
    xc = data.x - data.x.mean(axis=0)
    sigma = xc.T @ xc / n
    pooled = np.zeros((d, d))
    for rows in groups:
        block = data.x[rows]
        centered = block - block.mean(axis=0)
        pooled += centered.T @ centered
    a = sigma - pooled / n
    pair = MatrixPair(SymMatrix(a), SymMatrix(sigma))
    return GEPProblem(pair=pair, meta=ProblemMeta(kind="sir", slices=data.slices))


def direction_error(v_hat, v_star) -> float:
    """Squared distance between unit-normalized directions, up to sign.

    min(||u - w||^2, ||u + w||^2) = 2 - 2 |u . w|, in [0, 2].
    """
    u = as_vector(v_hat)
    w = as_vector(v_star)
    nu, nw = float(np.linalg.norm(u)), float(np.linalg.norm(w))
    if nu == 0.0 or nw == 0.0:
        raise ZeroVector("direction_error needs nonzero vectors")
    if len(u) != len(w):
        raise DimMismatch(f"lengths differ: {len(u)} vs {len(w)}")
    align = abs(float(u @ w)) / (nu * nw)
    return max(0.0, 2.0 - 2.0 * align)
