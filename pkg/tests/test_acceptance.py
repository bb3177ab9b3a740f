"""Shipping gate: nine numerical criteria with pinned tolerances and runtime caps.

Each test prints a one-line verdict (visible under plain ``pytest -v``)
before asserting, so a red run still reports every criterion.  Constructions
and seeds are frozen; see the README for what each criterion checks.
"""

import importlib.resources
import json
import os
import time

import numpy as np

from rifle import (
    ExperimentSpec,
    LabeledDataset,
    MatrixPair,
    RifleConfig,
    SymMatrix,
    cholesky,
    default_step_size,
    exhaustive_sparse_gep,
    fda_build,
    gen_fda_binary,
    gen_planted_gep,
    rifle_step,
    rifle_warm_start,
    run_experiment,
    sample_mvn,
    block_ar_cov,
    sparse_spectral_norm,
    spectral_norm,
)
from rifle.rng import rng_substream

import helpers


def _verdict(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


class TestAcceptance:
    def test_1_oracle_equivalence(self, capsys):
        t0 = time.time()
        hits = 0
        for trial in range(100):
            r = rng_substream(9101, trial)
            pair, _ = gen_planted_gep(10, 2, 2.0, r)
            wa = helpers.rand_sym(r, 10)
            wb = helpers.rand_sym(r, 10)
            hat = MatrixPair(
                SymMatrix(pair.a.values + 0.15 * wa.values / spectral_norm(wa)),
                SymMatrix(pair.b.values + 0.05 * wb.values / spectral_norm(wb)),
            )
            cholesky(hat.b)
            oracle = exhaustive_sparse_gep(hat, 2)
            best = -np.inf
            for attempt in range(5):
                res = rifle_warm_start(hat, RifleConfig(k=2, seed=1000 * trial + attempt))
                best = max(best, res.rho)
            if abs(best - oracle.lam) <= 1e-6 * max(1.0, abs(oracle.lam)):
                hits += 1
        elapsed = time.time() - t0
        ok = hits >= 90 and elapsed < 60.0
        _verdict(capsys, "oracle-equivalence", ok,
                 f"{hits}/100 within 1e-6 of exhaustive search, {elapsed:.1f}s")
        assert hits >= 90, f"only {hits}/100 trials matched the oracle"
        assert elapsed < 60.0, f"runtime {elapsed:.1f}s exceeds 1 minute"

    def test_2_geometric_convergence(self, capsys):
        t0 = time.time()
        worst_ratio = 0.0
        stalls = 0
        for trial in range(50):
            r = rng_substream(20260814, trial)
            pair, w = helpers.planted_sparse_pair(r, 50, 5, 2.0)
            z = r.normals(50)
            z -= (z @ w) * w
            v = 0.6 * w + 0.8 * (z / np.linalg.norm(z))
            v /= np.linalg.norm(v)
            eta = default_step_size(pair.b)
            err = 1.0 - abs(v @ w)
            for _ in range(300):
                if err < 1e-10:
                    break
                v, _rho = rifle_step(pair, v, eta, 5)
                new_err = 1.0 - abs(v @ w)
                worst_ratio = max(worst_ratio, new_err / err)
                err = new_err
            if err >= 1e-10:
                stalls += 1
        elapsed = time.time() - t0
        ok = worst_ratio <= 0.99 and stalls == 0 and elapsed < 60.0
        _verdict(capsys, "geometric-convergence", ok,
                 f"worst per-step ratio {worst_ratio:.4f}, {stalls} stalls, {elapsed:.1f}s")
        assert worst_ratio <= 0.99, f"error ratio {worst_ratio:.4f} above 0.99"
        assert stalls == 0, f"{stalls}/50 instances never reached 1e-10"
        assert elapsed < 60.0, f"runtime {elapsed:.1f}s exceeds 1 minute"

    def test_3_cca_statistical_rate(self, capsys):
        t0 = time.time()
        spec = ExperimentSpec(scenario="cca", seed=20260814, replications=30,
                              d=100, n_grid=(92, 184, 368, 737), k=15,
                              schedule=(30, 15), restarts=5)
        report = run_experiment(spec)
        assert report.n_failed == 0
        scaled, means = [], []
        for n in spec.n_grid:
            rows = [row for row in report.rows if row["n"] == n]
            scaled.append(rows[0]["scaled_n"])
            means.append(np.mean([row["direction_error"] for row in rows]))
        slope = float(np.polyfit(np.log(scaled), np.log(means), 1)[0])
        elapsed = time.time() - t0
        ok = -1.35 <= slope <= -0.65 and elapsed < 600.0
        _verdict(capsys, "statistical-rate", ok,
                 f"log-log slope {slope:.3f} over scaled n {np.round(scaled, 2).tolist()}, "
                 f"{elapsed:.1f}s")
        assert -1.35 <= slope <= -0.65, f"slope {slope:.3f} outside [-1.35, -0.65]"
        assert elapsed < 600.0, f"runtime {elapsed:.1f}s exceeds 10 minutes"

    def test_4_fda_error_ordering(self, capsys):
        t0 = time.time()
        spec = ExperimentSpec(scenario="fda-binary", seed=20260814, replications=20,
                              d=200, n_train=300, n_test=500, k_grid=(20, 41, 80),
                              schedule_policy="double")
        report = run_experiment(spec)
        assert report.n_failed == 0
        mean_rifle = report.aggregates["test_errors"]["mean"]
        se_rifle = report.aggregates["test_errors"]["se"]
        mean_oracle = report.aggregates["oracle_errors"]["mean"]
        wins = sum(1 for row in report.rows
                   if row["test_errors"] < row["ablation_errors"])
        bound = 2.0 * mean_oracle + 2.0 * se_rifle
        elapsed = time.time() - t0
        ok = mean_rifle <= bound and wins >= 17 and elapsed < 600.0
        _verdict(capsys, "fda-ordering", ok,
                 f"rifle {mean_rifle:.2f} vs bound {bound:.2f} errors/500, "
                 f"beats ablation {wins}/20, {elapsed:.1f}s")
        assert mean_rifle <= bound, f"mean {mean_rifle:.2f} above {bound:.2f}"
        assert wins >= 17, f"beat the ablation in only {wins}/20 replications"
        assert elapsed < 600.0, f"runtime {elapsed:.1f}s exceeds 10 minutes"

    def test_5_oracle_support_count(self, capsys):
        t0 = time.time()
        scen = gen_fda_binary(1000, 1, rng_substream(5, 0))
        dense_count = int(np.sum(np.abs(scen.v_star) > 1e-10))
        elapsed = time.time() - t0
        ok = dense_count == 41 and len(scen.support) == 41 and elapsed < 60.0
        _verdict(capsys, "oracle-support-count", ok,
                 f"{dense_count} nonzeros above 1e-10 at d=1000, {elapsed:.1f}s")
        assert dense_count == 41, f"expected 41 nonzeros, found {dense_count}"
        assert len(scen.support) == 41
        assert elapsed < 60.0, f"runtime {elapsed:.1f}s exceeds 1 minute"

    def test_6_scatter_identity(self, capsys):
        t0 = time.time()
        worst = 0.0
        for i in range(100):
            r = rng_substream(20260814, 1000 + i)
            n = 30 + int(r.uniforms(1)[0] * 120)
            d = 2 + int(r.uniforms(1)[0] * 10)
            classes = 2 + int(r.uniforms(1)[0] * 3)
            x = r.normals(n * d).reshape(n, d) + 2.0 * r.normals(d)
            labels = (r.uniforms(n) * classes).astype(int)
            labels[:classes] = np.arange(classes)
            prob = fda_build(LabeledDataset(x, labels))
            total = x.T @ x / n
            gap = prob.pair.a.values + prob.pair.b.values - total
            worst = max(worst, np.linalg.norm(gap) / np.linalg.norm(total))
        elapsed = time.time() - t0
        ok = worst <= 1e-10 and elapsed < 60.0
        _verdict(capsys, "scatter-identity", ok,
                 f"worst relative Frobenius gap {worst:.2e} over 100 datasets, "
                 f"{elapsed:.1f}s")
        assert worst <= 1e-10, f"scatter identity off by {worst:.2e}"
        assert elapsed < 60.0

    def test_7_perturbation_lemmas(self, capsys):
        t0 = time.time()
        suites = {
            "weyl": helpers.weyl_worst(trials=200, seed=101),
            "interval": helpers.eigenvalue_interval_worst(trials=200, seed=202),
            "truncation": helpers.truncation_overlap_worst(pairs=500, seed=303),
            "restricted-vector": helpers.restricted_direction_bound_worst(
                trials=200, seed=404),
        }
        elapsed = time.time() - t0
        worst = max(suites.values())
        ok = worst <= 1e-9 and elapsed < 120.0
        detail = ", ".join(f"{name} {value:.1e}" for name, value in suites.items())
        _verdict(capsys, "perturbation-bounds", ok,
                 f"worst violations: {detail}, {elapsed:.1f}s")
        for name, value in suites.items():
            assert value <= 1e-9, f"{name} suite violated its bound by {value:.2e}"
        assert elapsed < 120.0, f"runtime {elapsed:.1f}s exceeds 2 minutes"

    def test_8_covariance_error_scaling(self, capsys):
        t0 = time.time()
        sigma = block_ar_cov(50)
        devs = {200: [], 800: []}
        for rep in range(200):
            r = rng_substream(20260814, rep)
            x_big = sample_mvn(r, np.zeros(50), sigma, 800)
            for n in (200, 800):
                x = x_big[:n]
                hat = x.T @ x / n
                devs[n].append(sparse_spectral_norm(SymMatrix(hat - sigma.values), 5))
        q200 = float(np.percentile(devs[200], 95))
        q800 = float(np.percentile(devs[800], 95))
        ratio = q200 / q800
        elapsed = time.time() - t0
        ok = 1.7 <= ratio <= 2.3 and elapsed < 300.0
        _verdict(capsys, "covariance-error-scaling", ok,
                 f"95th percentile ratio {ratio:.3f} "
                 f"(q95 {q200:.4f} at n=200, {q800:.4f} at n=800), {elapsed:.1f}s")
        assert 1.7 <= ratio <= 2.3, f"shrink factor {ratio:.3f} outside [1.7, 2.3]"
        assert elapsed < 300.0, f"runtime {elapsed:.1f}s exceeds 5 minutes"

    def test_9_bench_determinism(self, capsys, tmp_path):
        t0 = time.time()
        spec_path = importlib.resources.files("rifle").joinpath("data/quick_bench.json")
        spec = ExperimentSpec.from_json(str(spec_path))
        dirs = [os.path.join(tmp_path, name) for name in ("first", "second")]
        for out in dirs:
            run_experiment(spec, out_dir=out)
        rows = [open(os.path.join(out, "rows.csv"), "rb").read() for out in dirs]
        summaries = [open(os.path.join(out, "summary.json"), "rb").read() for out in dirs]
        elapsed = time.time() - t0
        identical = rows[0] == rows[1] and summaries[0] == summaries[1]
        ok = identical and elapsed < 60.0
        _verdict(capsys, "bench-determinism", ok,
                 f"rows.csv byte-identical: {rows[0] == rows[1]}, "
                 f"summary.json byte-identical: {summaries[0] == summaries[1]}, "
                 f"{elapsed:.1f}s")
        assert rows[0] == rows[1], "rows.csv differs between identical runs"
        assert summaries[0] == summaries[1], "summary.json differs between identical runs"
        assert elapsed < 60.0
        body = json.loads(summaries[0])
        assert body["n_failed"] == 0
