"""Acceptance gate: one test per release criterion.

Each test prints a single summary line (visible under ``pytest -s``) and
enforces its runtime budget.  The criteria pin the statistical protocol:
exact configurations, seeds, tolerances, and orderings.
"""
import math
import time

import numpy as np
import pytest

from fdridge.datasets import (SparseRowMatrix, SyntheticSpec, dump_libsvm,
                              parse_libsvm, synthetic_regression)
from fdridge.diagnostics import (budget_for_theta, optimal_diagnostics,
                                 LinearModelSpec, sketched_diagnostics)
from fdridge.experiments import (SweepConfig, run_bias_variance_sweep,
                                 run_iterative_experiment,
                                 run_sketch_accuracy)
from fdridge.sketch import (MODE_FD, MODE_RFD, StreamingSketch, sketch_matrix,
                            tail_masses)
from fdridge.solvers import (RidgeProblem, InverseOperator,
                             classical_sketch_solve, fdrr_solve,
                             hessian_sketch_solve, ifdrr_solve, solve_exact)
from fdridge.random_sketch import GaussianSketchSpec, realize_gaussian


def spectral_norm(M):
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


def test_criterion_1_covariance_error_bounds():
    # 512 x 64 standard normal data, 5 seeds, m in {8, 16, 32}: the
    # spectral error of both sketch variants must respect the rank-k
    # bound for every admissible k, with zero violations, in < 30 s.
    start = time.perf_counter()
    checks = 0
    worst = 0.0
    for seed in range(5):
        A = np.random.default_rng(seed).standard_normal((512, 64))
        gram = A.T @ A
        tails = tail_masses(A)
        for m in (8, 16, 32):
            sk = StreamingSketch(m, 64)
            sk.extend(A)
            for mode in (MODE_FD, MODE_RFD):
                err = spectral_norm(gram - sk.finalize(mode).covariance())
                for k in range(m):
                    bound = float(tails[k]) / (m - k)
                    if mode == MODE_RFD:
                        bound /= 2.0
                    assert err <= bound * (1 + 1e-9), \
                        f"seed={seed} m={m} k={k} {mode}: {err} > {bound}"
                    worst = max(worst, err / bound)
                    checks += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    print(f"criterion 1 PASS: {checks} bound checks, worst error/bound "
          f"{worst:.4f}, {elapsed:.1f}s")


def test_criterion_2_lossless_regime():
    # With m >= n the sketch is exact, the one-shot solution matches the
    # dense solver to 1e-10, and iterative refinement lands at the first
    # iteration.
    rng = np.random.default_rng(1)
    A = rng.standard_normal((24, 32))
    y = rng.standard_normal(24)
    worst = 0.0
    for gamma in (0.5, 3.0):
        problem = RidgeProblem(A, y, gamma)
        x_star = solve_exact(problem)
        norm = np.linalg.norm(x_star)
        for m in (24, 40):
            for mode in (MODE_FD, MODE_RFD):
                x = fdrr_solve(problem, m, mode=mode)
                rel = np.linalg.norm(x - x_star) / norm
                assert rel < 1e-10
                worst = max(worst, rel)
                _, trace = ifdrr_solve(problem, m, t=4, mode=mode,
                                       x_star=x_star)
                for dist in trace.residual_norms[1:]:
                    assert dist <= 1e-10 * norm
    print(f"criterion 2 PASS: lossless solves match to {worst:.2e} "
          f"relative; refinement converges at iteration 1")


def test_criterion_3_theta_budget_intervals():
    # Protocol instance (n=1024, d=512, rank 77, sd 2) at gamma = 1: for
    # each theta target, size the sketch with the smallest feasible k,
    # then require every diagnostic ratio inside [1-theta, 1/(1-theta)]
    # and inside the tighter robust-variant interval, on 3 seeds, < 2 min.
    start = time.perf_counter()
    gamma = 1.0
    budgets = []
    for seed in range(3):
        A, _, truth = synthetic_regression(
            SyntheticSpec(1024, 512, 0.15, 2.0, seed))
        model = LinearModelSpec(truth, 2.0)
        tails = tail_masses(A)
        base = optimal_diagnostics(A, model, gamma)
        for theta in (0.3, 0.5, 0.7):
            k, m = next(
                (k, math.ceil(budget_for_theta(theta, k, float(tails[k]),
                                               gamma)))
                for k in range(512)
                if math.ceil(budget_for_theta(theta, k, float(tails[k]),
                                              gamma)) <= 512)
            if seed == 0:
                budgets.append((theta, k, m))
            robust_floor = ((1.0 + math.sqrt(1.0 - theta)) / 2.0) ** 2
            intervals = {MODE_FD: (1.0 - theta, 1.0 / (1.0 - theta)),
                         MODE_RFD: (robust_floor, 1.0 / robust_floor)}
            for mode, (lo, hi) in intervals.items():
                report = sketched_diagnostics(A, sketch_matrix(A, m, mode),
                                              model, gamma)
                for value, ref in ((report.bias_sq, base.bias_sq),
                                   (report.var_trace, base.var_trace),
                                   (report.mse, base.mse)):
                    ratio = value / ref
                    assert lo - 1e-12 <= ratio <= hi + 1e-12, \
                        f"seed={seed} theta={theta} {mode}: ratio {ratio} " \
                        f"outside [{lo}, {hi}]"
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    summary = " ".join(f"theta={th}:(k={k},m={m})" for th, k, m in budgets)
    print(f"criterion 3 PASS: ratios inside both intervals on 3 seeds; "
          f"{summary}, {elapsed:.1f}s")


def test_criterion_4_contraction_rates():
    # gamma chosen so the tuned tail satisfies alpha * tail = gamma / 4;
    # consecutive relative errors must then contract by at least 3x
    # (plain) and 7x (robust) until the 1e-12 floor, in < 30 s.
    start = time.perf_counter()
    A, y, _ = synthetic_regression(SyntheticSpec(256, 64, 0.15, 2.0, 5))
    m, k = 16, 8
    # alpha * tail = gamma / 4 with alpha = 1 / (m - k) = 1/8
    gamma = float(tail_masses(A)[k]) / 2.0
    problem = RidgeProblem(A, y, gamma)
    x_star = solve_exact(problem)
    norm = np.linalg.norm(x_star)
    rates = {}
    for mode, limit in ((MODE_FD, 1 / 3), (MODE_RFD, 1 / 7)):
        _, trace = ifdrr_solve(problem, m, t=10, mode=mode, x_star=x_star)
        rels = [dist / norm for dist in trace.residual_norms]
        worst = 0.0
        for prev, cur in zip(rels, rels[1:]):
            if prev <= 1e-12 or cur <= 1e-12:
                continue
            ratio = cur / prev
            assert ratio <= limit + 1e-6, f"{mode}: ratio {ratio} > {limit}"
            worst = max(worst, ratio)
        rates[mode] = worst
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    print(f"criterion 4 PASS: worst contraction fd={rates[MODE_FD]:.4f} "
          f"(limit 0.3333), rfd={rates[MODE_RFD]:.4f} (limit 0.1429), "
          f"{elapsed:.1f}s")


RANDOMIZED = ("classical:gauss", "classical:sjlt",
              "hessian:gauss", "hessian:sjlt")


def _sweep_by_method(r):
    config = SweepConfig(dataset="synthetic", n=1024, d=512, r=r,
                         noise_sd=2.0, m=256, trials=10, seed=0)
    rows = run_bias_variance_sweep(config)
    table = {}
    for row in rows:
        table.setdefault(row["method"], {})[row["gamma"]] = row
    return config.gammas, table


def test_criterion_5_statistical_comparison():
    # Full protocol sweep, 10 trials, m = 256.  Low-rank instance
    # (rank 77): both deterministic sketches beat every randomized
    # method on every relative diagnostic at every gamma.  Mid-rank
    # instance (rank 128): the robust variant has the smallest MSE
    # everywhere and the plain variant stays within 2x of it once
    # gamma clears 2^-4.  Budget < 10 min.
    start = time.perf_counter()
    gammas, low = _sweep_by_method(0.15)
    for g in gammas:
        for metric in ("rel_bias", "rel_var", "rel_mse"):
            ours = max(low["fdrr"][g][metric], low["rfdrr"][g][metric])
            best_random = min(low[meth][g][metric] for meth in RANDOMIZED)
            assert ours < best_random, \
                f"rank 77, gamma={g}, {metric}: {ours} >= {best_random}"

    _, mid = _sweep_by_method(0.25)
    others = ("fdrr",) + RANDOMIZED
    for g in gammas:
        rfd_mse = mid["rfdrr"][g]["mse"]
        for meth in others:
            assert rfd_mse <= mid[meth][g]["mse"], \
                f"rank 128, gamma={g}: rfdrr mse above {meth}"
        if g > 2.0 ** -4:
            for metric in ("bias_sq", "var_trace", "mse"):
                assert mid["fdrr"][g][metric] <= 2.0 * mid["rfdrr"][g][metric]
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    print(f"criterion 5 PASS: rank-77 dominance on all relative metrics "
          f"and rank-128 MSE ordering over {len(gammas)} gammas, "
          f"{elapsed:.1f}s")


def test_criterion_6_kernel_iteration_ordering():
    # Random-features instance (10^4 samples, 512 features, bandwidth
    # 0.5), m = 256, 10 iterations.  For gamma in {100, 1000} the
    # per-iteration error order must be rfd <= fd <= refreshed sjlt at
    # every step, where errors at the 1e-12 floor count as ties.  The
    # gamma = 10 runs are recorded (divergences allowed, not failures).
    start = time.perf_counter()
    config = SweepConfig(dataset="gaussian-rff", n=10_000, d=512, raw_dim=8,
                         rff_gamma=0.5, noise_sd=2.0, m=256, seed=0,
                         gammas=(10.0, 100.0, 1000.0),
                         methods=("ifdrr:fd", "ifdrr:rfd", "ihs:sjlt"),
                         trials=10)
    rows = run_iterative_experiment(config, t=10)
    by_cell = {(r["method"], r["gamma"], r["iteration"]): r for r in rows}

    def level(method, gamma, i):
        value = by_cell[(method, gamma, i)]["log10_error"]
        return max(value, -12.0)

    for gamma in (100.0, 1000.0):
        for i in range(1, 11):
            rfd, fd = level("ifdrr:rfd", gamma, i), level("ifdrr:fd", gamma, i)
            ihs = level("ihs:sjlt", gamma, i)
            assert rfd <= fd <= ihs, \
                f"gamma={gamma} iter={i}: rfd={rfd} fd={fd} ihs={ihs}"
    recorded = [r for r in rows if r["gamma"] == 10.0]
    assert len(recorded) == 30
    flags = sorted({r["diverged"] for r in recorded})
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    print(f"criterion 6 PASS: rfd <= fd <= ihs:sjlt at every iteration for "
          f"gamma in {{100, 1000}}; gamma=10 recorded with diverged flags "
          f"{flags}, {elapsed:.1f}s")


def test_criterion_7_solver_oracles():
    # Dense-algebra oracle agreement at 1e-10 for the fast inverse
    # operator and all four one-shot solvers, plus the preconditioned
    # residual spectrum: real negative eigenvalues with magnitudes in
    # [gamma', gamma^2/gamma'] on 20 random instances for both variants.
    rng = np.random.default_rng(70)
    for _ in range(5):
        B = rng.standard_normal((6, 16))
        g = float(rng.uniform(0.1, 2.0))
        op = InverseOperator(B, g)
        dense = np.linalg.inv(B.T @ B + g * np.eye(16))
        v = rng.standard_normal(16)
        assert np.linalg.norm(op.apply(v) - dense @ v) <= \
            1e-10 * np.linalg.norm(dense @ v)

    A = rng.standard_normal((40, 8))
    y = rng.standard_normal(40)
    gamma = 0.6
    problem = RidgeProblem(A, y, gamma)
    eye = np.eye(8)

    def close(x, ref):
        assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)

    close(solve_exact(problem),
          np.linalg.inv(A.T @ A + gamma * eye) @ (A.T @ y))
    out = sketch_matrix(A, 4, MODE_RFD)
    close(fdrr_solve(problem, 4, mode=MODE_RFD),
          np.linalg.inv(out.covariance() + gamma * eye) @ (A.T @ y))
    S = realize_gaussian(GaussianSketchSpec(m=16, n=40, seed=3))
    SA = S @ A
    close(classical_sketch_solve(SA, S @ y, gamma),
          np.linalg.inv(SA.T @ SA + gamma * eye) @ (SA.T @ (S @ y)))
    close(hessian_sketch_solve(SA, A.T @ y, gamma),
          np.linalg.inv(SA.T @ SA + gamma * eye) @ (A.T @ y))

    checked = 0
    for trial in range(20):
        rng_t = np.random.default_rng(700 + trial)
        A_t = rng_t.standard_normal((50, 12)) * np.linspace(1.5, 0.1, 12)
        tails = tail_masses(A_t)
        m = 6
        for mode in (MODE_FD, MODE_RFD):
            half = 2.0 if mode == MODE_RFD else 1.0
            shifted = [float(tails[k]) / ((m - k) * half) for k in range(m)]
            bound = min(shifted)
            gamma_t = 2.5 * bound
            gamma_lo = gamma_t - bound
            out_t = sketch_matrix(A_t, m, mode)
            gram = A_t.T @ A_t
            H = gram + gamma_t * np.eye(12)
            H_hat = out_t.covariance() + gamma_t * np.eye(12)
            M = (np.linalg.solve(H_hat, gram) - np.eye(12)) @ H
            eig = np.linalg.eigvals(M)
            scale = float(np.max(np.abs(eig)))
            assert np.max(np.abs(eig.imag)) <= 1e-8 * scale
            real = eig.real
            assert np.all(real < 0.0)
            mags = np.abs(real)
            assert np.all(mags >= gamma_lo * (1 - 1e-9))
            assert np.all(mags <= gamma_t ** 2 / gamma_lo * (1 + 1e-9))
            checked += 1
    print(f"criterion 7 PASS: operator and solver oracles at 1e-10; "
          f"residual spectrum inside [gamma', gamma^2/gamma'] on "
          f"{checked} instance/mode pairs")


def test_criterion_8_reproducibility(tmp_path):
    # Sparse text I/O round-trips 100 random matrices exactly, and every
    # experiment table is byte-identical when its config runs twice.
    rng = np.random.default_rng(80)
    path = tmp_path / "round.txt"
    for _ in range(100):
        n = int(rng.integers(1, 10))
        d = int(rng.integers(1, 8))
        rows = []
        for _ in range(n):
            width = int(rng.integers(0, d + 1))
            idx = np.sort(rng.choice(d, size=width, replace=False))
            rows.append((idx.astype(np.int64), rng.standard_normal(width)))
        matrix = SparseRowMatrix(n, d, rows)
        labels = rng.standard_normal(n)
        dump_libsvm(matrix, labels, path)
        back, back_labels = parse_libsvm(path, n_features=d)
        assert np.array_equal(back.toarray(), matrix.toarray())
        assert np.array_equal(back_labels, labels)

    config = SweepConfig(dataset="synthetic", n=64, d=16, r=0.25,
                         noise_sd=1.0, m=8, gammas=(0.5, 2.0),
                         methods=("exact", "fdrr", "classical:gauss"),
                         trials=3, seed=0)
    pairs = []
    for label, run in (
            ("sweep", lambda p: run_bias_variance_sweep(config, out=p)),
            ("iterate", lambda p: run_iterative_experiment(
                SweepConfig(dataset="synthetic", n=64, d=16, r=0.25,
                            noise_sd=1.0, m=8, gammas=(0.5,),
                            methods=("ifdrr:fd", "ihs:gauss"), trials=3,
                            seed=0), 4, out=p)),
            ("sketch-acc", lambda p: run_sketch_accuracy(config, out=p))):
        first = tmp_path / f"{label}-1.csv"
        second = tmp_path / f"{label}-2.csv"
        run(first)
        run(second)
        assert first.read_bytes() == second.read_bytes(), label
        pairs.append(label)
    print(f"criterion 8 PASS: 100 exact text round-trips; byte-identical "
          f"reruns for {', '.join(pairs)}")
