"""Seeded synthetic scenarios with known population ground truth.

Each generator returns both the sampled data and the population quantities
(covariances, oracle directions, leading eigenvalue) that the estimators
are judged against.  Everything is a pure function of the supplied RngState,
so rerunning with the same substream reproduces a scenario byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import Indivisible, TooSmall
from .linalg import (
    IndexSet,
    MatrixPair,
    SymMatrix,
    cholesky,
    solve_lower,
    solve_lower_t,
)
from .models import LabeledDataset, PairedDataset
from .rng import RngState


def block_ar_cov(d: int, block_count: int = 5, rho: float = 0.7) -> SymMatrix:
    """Block-diagonal covariance with AR(rho) blocks: rho^|i-j| within blocks."""
    if d < 1:
        raise ValueError("dimension must be positive")
    if d % block_count != 0:
        raise Indivisible(f"{block_count} blocks do not divide dimension {d}")
    size = d // block_count
    idx = np.arange(size)
    block = rho ** np.abs(idx[:, None] - idx[None, :])
    full = np.zeros((d, d))
    for b in range(block_count):
        lo = b * size
        full[lo : lo + size, lo : lo + size] = block
    return SymMatrix(full)


def sample_mvn(rng: RngState, mean, cov: SymMatrix, n: int) -> np.ndarray:
    """n rows from N(mean, cov) via the Cholesky factor and rng normals."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    mu = np.asarray(mean, dtype=float)
    if mu.ndim != 1 or len(mu) != cov.dim:
        raise ValueError(f"mean length {mu.shape} does not match cov dim {cov.dim}")
    low = cholesky(cov).lower
    z = rng.normals(n * cov.dim).reshape(n, cov.dim)
    return mu + z @ low.T


@dataclass(frozen=True)
class ScenarioFDA:
    """Labeled draw plus the population pencil it came from.

    v_star is the unit-normalized leading generalized eigenvector of
    (sigma_b, sigma_w); support holds its nonzero coordinates (1e-10
    threshold) and lambda1 its eigenvalue.
    """

    data: LabeledDataset
    sigma: SymMatrix
    class_means: np.ndarray
    sigma_b: SymMatrix
    sigma_w: SymMatrix
    v_star: np.ndarray
    support: IndexSet
    lambda1: float


@dataclass(frozen=True)
class ScenarioCCA:
    """Paired draw plus the population joint covariance and directions.

    vx_star and vy_star carry the scaling (v^T Sigma_view v) = 1.
    """

    data: PairedDataset
    sigma: SymMatrix
    vx_star: np.ndarray
    vy_star: np.ndarray
    lambda1: float


# Mean shift used by both discriminant scenarios: value at the 1-based even
# coordinates 2, 4, ..., 40, which is 0-based odd 1, 3, ..., 39.
_SHIFT_COORDS = np.arange(1, 40, 2)


def _oracle_direction(sigma: SymMatrix, shift: np.ndarray):
    """Unit-normalized sigma^{-1} shift and the quadratic form shift^T sigma^{-1} shift."""
    low = cholesky(sigma).lower
    solved = solve_lower_t(low, solve_lower(low, shift))
    quad = float(shift @ solved)
    v = solved / np.linalg.norm(solved)
    return v, quad


def _fda_scenario(d: int, n_per_class: int, rng: RngState, step: float, k: int) -> ScenarioFDA:
    if d < 41:
        raise TooSmall(f"need d >= 41 to place the mean shift, got {d}")
    if n_per_class < 1:
        raise TooSmall("need at least one sample per class")
    sigma = block_ar_cov(d)
    base = np.zeros(d)
    base[_SHIFT_COORDS] = 1.0
    means = np.array([c * step * base for c in range(k)])
    # Uncentered between-class scatter with equal class weights; the
    # collinear means make it rank one along `base`.
    weight = float(np.mean([(c * step) ** 2 for c in range(k)]))
    sigma_b = SymMatrix(weight * np.outer(base, base))
    v_star, quad = _oracle_direction(sigma, base)
    support = IndexSet(np.flatnonzero(np.abs(v_star) > 1e-10))
    rows = [sample_mvn(rng, means[c], sigma, n_per_class) for c in range(k)]
    labels = np.repeat(np.arange(k), n_per_class)
    data = LabeledDataset(np.vstack(rows), labels)
    return ScenarioFDA(
        data=data,
        sigma=sigma,
        class_means=means,
        sigma_b=sigma_b,
        sigma_w=sigma,
        v_star=v_star,
        support=support,
        lambda1=weight * quad,
    )


def gen_fda_binary(d: int, n_per_class: int, rng: RngState) -> ScenarioFDA:
    """Two balanced classes: mean 0 versus mean 0.5 on twenty coordinates.

    The population direction sigma^{-1} shift spreads the twenty-coordinate
    shift to 41 contiguous features (the AR block inverse is tridiagonal).
    """
    return _fda_scenario(d, n_per_class, rng, step=0.5, k=2)


def gen_fda_multiclass(d: int, n_per_class: int, rng: RngState) -> ScenarioFDA:
    """Four balanced classes with collinear means (k-1)/3 on the shift coords."""
    return _fda_scenario(d, n_per_class, rng, step=1.0 / 3.0, k=4)


def gen_cca(d: int, n: int, rng: RngState) -> ScenarioCCA:
    """Joint Gaussian with one planted canonical pair at correlation 0.9.

    Per-view dimension d/2; directions supported on 1-based coordinates
    1, 6, 11, 16, 21 with equal weights, rescaled to v^T Sigma v = 1; the
    cross block is Sigma_x vx lambda1 vy^T Sigma_y.
    """
    if d % 2 != 0:
        raise TooSmall(f"need an even dimension, got {d}")
    p = d // 2
    if p < 25:
        raise TooSmall(f"need per-view dimension >= 25, got {p}")
    lambda1 = 0.9
    sigma_view = block_ar_cov(p)
    raw = np.zeros(p)
    raw[np.arange(0, 25, 5)] = 1.0 / np.sqrt(5.0)
    scale = float(raw @ sigma_view.values @ raw)
    vx = raw / np.sqrt(scale)
    vy = vx.copy()
    sx = sigma_view.values
    cross = lambda1 * np.outer(sx @ vx, sx @ vy)
    joint = np.zeros((d, d))
    joint[:p, :p] = sx
    joint[p:, p:] = sx
    joint[:p, p:] = cross
    joint[p:, :p] = cross.T
    sigma = SymMatrix(joint)
    cholesky(sigma)  # NotPositiveDefinite if the planted correlation broke PD
    draws = sample_mvn(rng, np.zeros(d), sigma, n)
    data = PairedDataset(draws[:, :p], draws[:, p:])
    return ScenarioCCA(data=data, sigma=sigma, vx_star=vx, vy_star=vy, lambda1=lambda1)


def gen_planted_gep(d: int, s: int, lambda1: float, rng: RngState):
    """A noiseless pencil whose leading generalized eigenvector is s-sparse.

    B is the block AR covariance (single block when 5 does not divide d).
    A places lambda1 on w and strictly smaller eigenvalues on a few
    B-orthogonal directions, so w is the unique maximizer.  Returns
    (MatrixPair, w) with w unit-normalized.
    """
    if not 1 <= s <= d:
        raise ValueError(f"s={s} outside 1..{d}")
    if lambda1 <= 0:
        raise ValueError("lambda1 must be positive")
    b = block_ar_cov(d, 5 if d % 5 == 0 else 1)
    bv = b.values
    coords = np.sort(rng.permutation(d)[:s])
    mags = 0.8 + 0.4 * rng.uniforms(s)
    signs = np.where(rng.uniforms(s) < 0.5, -1.0, 1.0)
    w = np.zeros(d)
    w[coords] = signs * mags
    w /= np.linalg.norm(w)

    def beta_outer(vec):
        img = bv @ vec
        return np.outer(img, img) / float(vec @ img)

    a = lambda1 * beta_outer(w)
    basis = [w]
    for ratio in (0.4, 0.3, 0.2):
        if len(basis) >= d:
            break
        z = rng.normals(d)
        for u in basis:
            z = z - (float(z @ bv @ u) / float(u @ bv @ u)) * u
        if float(np.linalg.norm(z)) < 1e-8:
            continue
        a = a + (ratio * lambda1) * beta_outer(z)
        basis.append(z)
    return MatrixPair(SymMatrix(a), b), w


def write_matrix_csv(path: str, arr: np.ndarray):
    """Comma-separated values, no header; floats as shortest round-trip."""
    mat = np.atleast_2d(np.asarray(arr))
    with open(path, "w") as fh:
        for row in mat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_labels_csv(path: str, labels: np.ndarray):
    with open(path, "w") as fh:
        for value in labels:
            fh.write(f"{int(value)}\n")


def dump_scenario(scenario, out_dir: str, manifest_extra: dict | None = None) -> dict:
    """Write a scenario to CSV files plus a JSON manifest; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    manifest: dict = dict(manifest_extra or {})
    if isinstance(scenario, ScenarioFDA):
        files = {
            "x": "x.csv",
            "labels": "labels.csv",
            "sigma": "sigma.csv",
            "class_means": "class_means.csv",
            "sigma_b": "sigma_b.csv",
            "sigma_w": "sigma_w.csv",
            "v_star": "v_star.csv",
        }
        write_matrix_csv(os.path.join(out_dir, files["x"]), scenario.data.x)
        write_labels_csv(os.path.join(out_dir, files["labels"]), scenario.data.labels)
        write_matrix_csv(os.path.join(out_dir, files["sigma"]), scenario.sigma.values)
        write_matrix_csv(os.path.join(out_dir, files["class_means"]), scenario.class_means)
        write_matrix_csv(os.path.join(out_dir, files["sigma_b"]), scenario.sigma_b.values)
        write_matrix_csv(os.path.join(out_dir, files["sigma_w"]), scenario.sigma_w.values)
        write_matrix_csv(os.path.join(out_dir, files["v_star"]), scenario.v_star)
        manifest.update(
            kind="fda",
            files=files,
            lambda1=scenario.lambda1,
            support=list(scenario.support),
            n=scenario.data.n,
            d=scenario.data.dim,
            classes=scenario.data.n_classes,
        )
    elif isinstance(scenario, ScenarioCCA):
        files = {
            "x": "x.csv",
            "y": "y.csv",
            "sigma": "sigma.csv",
            "vx_star": "vx_star.csv",
            "vy_star": "vy_star.csv",
        }
        write_matrix_csv(os.path.join(out_dir, files["x"]), scenario.data.x)
        write_matrix_csv(os.path.join(out_dir, files["y"]), scenario.data.y)
        write_matrix_csv(os.path.join(out_dir, files["sigma"]), scenario.sigma.values)
        write_matrix_csv(os.path.join(out_dir, files["vx_star"]), scenario.vx_star)
        write_matrix_csv(os.path.join(out_dir, files["vy_star"]), scenario.vy_star)
        manifest.update(
            kind="cca",
            files=files,
            lambda1=scenario.lambda1,
            n=scenario.data.n,
            d=2 * scenario.data.x.shape[1],
        )
    else:
        raise TypeError(f"cannot dump scenario of type {type(scenario).__name__}")
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
