"""Shared constructions for the test suite.

Everything takes an explicit RngState so tests stay reproducible, and the
perturbation-bound suites live here because both the unit tests and the
acceptance gate run them.
"""

import numpy as np

from rifle import IndexSet, MatrixPair, SymMatrix, gen_eig, spectral_norm, sym_eig
from rifle.oracle import chordal_distance, crawford_number, lemma3_bound, restricted_leading_gevec
from rifle.rng import rng_substream


def rand_sym(rng, d, scale=1.0):
    """Random symmetric matrix with independent N(0, scale^2)-ish entries."""
    m = rng.normals(d * d).reshape(d, d) * scale
    return SymMatrix((m + m.T) / 2.0)


def rand_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.normals(d * d).reshape(d, d))
    return q * np.sign(np.diag(r))


def well_conditioned_spd(rng, d, jitter=0.2):
    """identity + jitter * Q diag(u) Q^T, eigenvalues inside [1, 1 + jitter]."""
    q = rand_orthogonal(rng, d)
    return SymMatrix(np.eye(d) + jitter * (q * rng.uniforms(d)) @ q.T)


def planted_sparse_pair(rng, d, s, lambda1, b=None, tail=(0.4, 0.3, 0.2)):
    """Pencil with a planted s-sparse leading generalized eigenvector.

    A puts lambda1 on w and strictly smaller values on a few B-orthogonal
    directions, exactly like the library generator but with a caller-chosen
    B.  Returns (pair, w) with ||w||_2 = 1.
    """
    if b is None:
        b = well_conditioned_spd(rng, d)
    bv = b.values
    coords = np.sort(rng.permutation(d)[:s])
    w = np.zeros(d)
    w[coords] = np.where(rng.uniforms(s) < 0.5, -1.0, 1.0) * (0.8 + 0.4 * rng.uniforms(s))
    w /= np.linalg.norm(w)

    def beta_outer(vec):
        img = bv @ vec
        return np.outer(img, img) / float(vec @ img)

    a = lambda1 * beta_outer(w)
    basis = [w]
    for ratio in tail:
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


def weyl_worst(trials=200, seed=101):
    """Worst violation of the additive eigenvalue sandwich under perturbation.

    For symmetric J and E, each descending eigenvalue of J + E must sit in
    [lambda_k(J) + lambda_min(E), lambda_k(J) + lambda_max(E)].  Returns the
    largest amount (signed) by which any instance escapes; negative means
    every instance satisfied the bounds with margin.
    """
    worst = -np.inf
    for i in range(trials):
        r = rng_substream(seed, i)
        d = 2 + int(r.uniforms(1)[0] * 7)
        j = rand_sym(r, d)
        e = rand_sym(r, d, scale=0.5)
        lj = sym_eig(j).eigenvalues
        le = sym_eig(e).eigenvalues
        ls = sym_eig(SymMatrix(j.values + e.values)).eigenvalues
        worst = max(worst, float(np.max(lj + le[-1] - ls)), float(np.max(ls - (lj + le[0]))))
    return worst


def eigenvalue_interval_worst(trials=200, seed=202):
    """Worst escape from the definite-pencil eigenvalue perturbation interval.

    With eps = hypot of the two perturbation norms below the Crawford number
    cr, each perturbed generalized eigenvalue must lie inside
    [(l cr - eps)/(cr + eps l), (l cr + eps)/(cr - eps l)].  The perturbation
    size is capped so both denominators stay positive (the interval is only
    meaningful there) and so the perturbed B stays positive definite.
    """
    worst = -np.inf
    for i in range(trials):
        r = rng_substream(seed, i)
        d = 3 + int(r.uniforms(1)[0] * 4)
        jm = rand_sym(r, d, scale=0.5)
        km = SymMatrix(np.eye(d) + rand_sym(r, d, scale=0.15).values)
        pair = MatrixPair(jm, km)
        cr = crawford_number(pair)
        lam = gen_eig(pair).eigenvalues
        qcap = min(0.5, 0.8 / max(1e-9, float(np.max(np.abs(lam)))))
        q = qcap * (0.2 + 0.8 * r.uniforms(1)[0])
        ej = rand_sym(r, d)
        ek = rand_sym(r, d)
        scale = q * cr / np.hypot(spectral_norm(ej), spectral_norm(ek))
        ej = SymMatrix(ej.values * scale)
        ek = SymMatrix(ek.values * scale)
        eps = np.hypot(spectral_norm(ej), spectral_norm(ek))
        khat = SymMatrix(km.values + ek.values)
        assert sym_eig(khat).eigenvalues[-1] > 1e-10, "perturbed B left the definite cone"
        lam_hat = gen_eig(MatrixPair(SymMatrix(jm.values + ej.values), khat)).eigenvalues
        for lk, lh in zip(lam, lam_hat):
            assert cr - eps * lk > 0 and cr + eps * lk > 0
            lo = (lk * cr - eps) / (cr + eps * lk)
            hi = (lk * cr + eps) / (cr - eps * lk)
            worst = max(worst, lo - lh, lh - hi)
    return worst


def truncation_overlap_worst(pairs=500, seed=303):
    """Worst violation of the truncation overlap bound.

    For unit y and unit sparse y' with |supp(y')| = m, truncating y to its
    top k magnitudes loses at most sqrt(m/k) * min(sqrt(1 - c^2),
    (1 + sqrt(m/k)) (1 - c^2)) of the overlap c = y . y'.  Each seeded pair
    is checked at every truncation level, on both sides of k = m.
    """
    worst = -np.inf
    for i in range(pairs):
        r = rng_substream(seed, i)
        d = 6 + int(r.uniforms(1)[0] * 15)
        y = r.normals(d)
        y /= np.linalg.norm(y)
        m = 1 + int(r.uniforms(1)[0] * (d - 1))
        yp = np.zeros(d)
        yp[r.permutation(d)[:m]] = r.normals(m)
        yp /= np.linalg.norm(yp)
        order = np.argsort(-np.abs(y), kind="stable")
        c = float(y @ yp)
        for k in range(1, d + 1):
            trunc = np.zeros(d)
            trunc[order[:k]] = y[order[:k]]
            ratio = np.sqrt(m / k)
            rhs = abs(c) - ratio * min(np.sqrt(1.0 - c * c), (1.0 + ratio) * (1.0 - c * c))
            worst = max(worst, rhs - abs(float(trunc @ yp)))
    return worst


def gapped_planted_instance(r, d=6, s=3, kp=5, noise=1e-3):
    """A dense gapped pencil with sparse leading eigenvector, plus a noisy copy.

    Builds B mildly off identity, sandwiches a fixed descending spectrum so
    the sparse w is the exact leading generalized eigenvector, perturbs both
    matrices at the given scale, and returns (pair, hat_pair, w, f) where f
    is a superset of supp(w) with |f| = kp.
    """
    b = SymMatrix(np.eye(d) + rand_sym(r, d, scale=0.1).values)
    if sym_eig(b).eigenvalues[-1] < 0.3:
        b = SymMatrix(b.values + np.eye(d) * 0.5)
    sup = np.sort(r.permutation(d)[:s])
    w = np.zeros(d)
    w[sup] = r.normals(s) + np.sign(r.normals(s)) * 0.5
    w /= np.sqrt(w @ b.values @ w)
    eb = sym_eig(b)
    bhalf = eb.eigenvectors @ np.diag(np.sqrt(eb.eigenvalues)) @ eb.eigenvectors.T
    basis = np.column_stack([bhalf @ w, r.normals(d * (d - 1)).reshape(d, d - 1)])
    q, _ = np.linalg.qr(basis)
    lams = 2.0 * 0.5 ** np.arange(d)
    lams[1] = 1.0
    a = SymMatrix(bhalf @ (q @ np.diag(lams) @ q.T) @ bhalf)
    pair = MatrixPair(a, b)
    rest = [c for c in r.permutation(d) if c not in set(sup.tolist())]
    f = IndexSet(np.sort(np.r_[sup, np.array(rest[: kp - s], dtype=int)]))
    ea = rand_sym(r, d, scale=noise)
    ebm = rand_sym(r, d, scale=noise)
    hat = MatrixPair(SymMatrix(a.values + ea.values), SymMatrix(b.values + ebm.values))
    return pair, hat, w, f


def restricted_direction_bound_worst(trials=200, seed=404):
    """Worst (measured - bound) for the restricted eigenvector error bound.

    The measured quantity is the sign-aligned distance between the leading
    unit eigenvector of the perturbed restricted pencil and the true one;
    the bound is delta(F) / (chordal gap * restricted Crawford number).
    """
    worst = -np.inf
    for i in range(trials):
        r = rng_substream(seed, i)
        pair, hat, w, f = gapped_planted_instance(r)
        bound = lemma3_bound(pair, hat, f)
        y = restricted_leading_gevec(hat, f).y
        ystar = w / np.linalg.norm(w)
        measured = min(np.linalg.norm(y - ystar), np.linalg.norm(y + ystar))
        worst = max(worst, measured - bound)
    return worst


def chordal_tightness(trials=200, seed=202):
    """Largest observed chi(lam, lam_hat) * cr / eps over the interval suite."""
    worst = 0.0
    for i in range(trials):
        r = rng_substream(seed, i)
        d = 3 + int(r.uniforms(1)[0] * 4)
        jm = rand_sym(r, d, scale=0.5)
        km = SymMatrix(np.eye(d) + rand_sym(r, d, scale=0.15).values)
        pair = MatrixPair(jm, km)
        cr = crawford_number(pair)
        lam = gen_eig(pair).eigenvalues
        qcap = min(0.5, 0.8 / max(1e-9, float(np.max(np.abs(lam)))))
        q = qcap * (0.2 + 0.8 * r.uniforms(1)[0])
        ej = rand_sym(r, d)
        ek = rand_sym(r, d)
        scale = q * cr / np.hypot(spectral_norm(ej), spectral_norm(ek))
        eps = np.hypot(spectral_norm(SymMatrix(ej.values * scale)),
                       spectral_norm(SymMatrix(ek.values * scale)))
        hat = MatrixPair(SymMatrix(jm.values + ej.values * scale),
                         SymMatrix(km.values + ek.values * scale))
        lam_hat = gen_eig(hat).eigenvalues
        for lk, lh in zip(lam, lam_hat):
            worst = max(worst, chordal_distance(float(lk), float(lh)) * cr / eps)
    return worst
