"""End-to-end acceptance checks.

Each test prints one ``[PASS]``/``[FAIL]`` line (visible even under output
capture) and then asserts. The 1000 x 1000 comparison rows only run with
``LOWRANK_LARGE=1``.
"""
import os
import time

import numpy as np
import pytest

from conftest import oracle_spectral_map
from lowrank.cli import main
from lowrank.experiments import (
    SWEEP_BASE,
    ProblemSpec,
    comparison_specs,
    generate_low_rank,
    relative_error,
    run_benchmark,
    run_phase_transition,
    run_sweep,
    sample_observations,
    uniform_axis,
)
from lowrank.linalg import nuclear_norm
from lowrank.operators import ObservationSet, make_dense_operator, make_sampling_operator
from lowrank.solvers import SolverConfig, asvt_solve, hard_threshold, soft_threshold


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail

    return emit


def test_c1_adjoint_identity(report, rng):
    t0 = time.perf_counter()
    worst = 0.0
    for kind in ("sampling", "dense"):
        for _ in range(100):
            n1, n2 = rng.integers(1, 21, size=2)
            m = int(rng.integers(1, min(100, n1 * n2) + 1))
            if kind == "sampling":
                op = make_sampling_operator(sample_observations(n1, n2, m, int(rng.integers(2**32))))
            else:
                op = make_dense_operator(rng.standard_normal((m, n1 * n2)), (n1, n2))
            x = rng.standard_normal((n1, n2))
            y = rng.standard_normal(m)
            gap = abs(float(op.apply(x) @ y) - float(np.sum(x * op.adjoint(y))))
            worst = max(worst, gap)
    elapsed = time.perf_counter() - t0
    report("C1 adjoint identity", worst <= 1e-10 and elapsed < 5,
           f"max gap {worst:.2e} (<= 1e-10), {elapsed:.2f}s (< 5s)")


def test_c2_threshold_oracles(report, rng):
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n1, n2 = rng.integers(1, 16, size=2)
        x = rng.standard_normal((n1, n2)) * rng.uniform(0.1, 10)
        tau = rng.uniform(0, 1.2) * np.linalg.norm(x, 2)
        hard = oracle_spectral_map(x, lambda s: np.where(s >= tau, s, 0.0))
        soft = oracle_spectral_map(x, lambda s: np.maximum(s - tau, 0.0))
        worst = max(worst, np.linalg.norm(hard_threshold(x, tau) - hard),
                    np.linalg.norm(soft_threshold(x, tau) - soft))

    def objective(z, y, tau):
        return 0.5 * np.sum((z - y) ** 2) + tau * nuclear_norm(z)

    beaten = 0
    for _ in range(20):
        y = rng.standard_normal((12, 10))
        tau = rng.uniform(0.2, 3.0)
        z = soft_threshold(y, tau)
        best = objective(z, y, tau)
        for scale in np.logspace(-4, 0, 1000):
            beaten += objective(z + scale * rng.standard_normal(y.shape), y, tau) < best - 1e-12
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and beaten == 0 and elapsed < 30
    report("C2 threshold oracles", ok,
           f"max Frobenius gap {worst:.2e} (<= 1e-8), {beaten}/20000 perturbations "
           f"improved the prox objective (0), {elapsed:.1f}s (< 30s)")


def test_c3_full_observation_recovery(report, rng):
    t0 = time.perf_counter()
    cfg = SolverConfig(step_size=1.0, max_iters=50)
    worst_re, worst_it, fails = 0.0, 0, 0
    for t in range(20):
        n1, n2 = rng.integers(5, 51, size=2)
        r = int(rng.integers(1, 6))
        truth = generate_low_rank(n1, n2, r, seed=1000 + t)
        obs = ObservationSet.full((n1, n2))
        res = asvt_solve(make_sampling_operator(obs), truth.reshape(-1), cfg)
        re = relative_error(truth, res.x_hat)
        worst_re, worst_it = max(worst_re, re), max(worst_it, res.iterations_run)
        fails += not (re <= 1e-6 and res.converged)
    elapsed = time.perf_counter() - t0
    report("C3 full-observation recovery", fails == 0 and elapsed < 30,
           f"worst RE {worst_re:.2e} (<= 1e-6), most iterations {worst_it} (<= 50), "
           f"{fails} failures, {elapsed:.1f}s (< 30s)")


def _compare_row(spec, trials, iter_bound):
    cfg = SolverConfig(step_size=1.0, max_iters=200)
    recs = run_benchmark([spec], ("asvt", "svt"), cfg, trials=trials)
    med = {}
    for alg in ("asvt", "svt"):
        rows = [r for r in recs if r.algorithm == alg]
        med[alg] = (np.median([r.iterations for r in rows]), np.median([r.relative_error for r in rows]))
    (ai, ae), (si, se) = med["asvt"], med["svt"]
    ok = ae <= 1.5e-3 and ai <= iter_bound and ai < si and ae < se
    detail = (f"{spec.n1}x{spec.n2} r={spec.rank} f={spec.fraction}: ASVT median "
              f"{ai:g} iters (<= {iter_bound}) RE {ae:.3e} (<= 1.5e-3); SVT median {si:g} iters RE {se:.3e}")
    return ok, detail


@pytest.mark.slow
def test_c4_comparison_500(report):
    t0 = time.perf_counter()
    ok, detail = _compare_row(ProblemSpec(500, 500, 10, fraction=0.15, seed=0), 5, 150)
    elapsed = time.perf_counter() - t0
    report("C4 500x500 comparison", ok and elapsed <= 600, f"{detail}; {elapsed:.0f}s (<= 600s)")


# Reference ASVT iteration counts for the 1000 x 1000 rows; the bound is twice
# each, matching 150 = 2 x 75 for the 500 x 500 row.
LARGE_ROWS = {(1000, 10): 38, (1000, 50): 29, (1000, 100): 37}


@pytest.mark.large
@pytest.mark.skipif(os.environ.get("LOWRANK_LARGE") != "1", reason="set LOWRANK_LARGE=1")
@pytest.mark.parametrize("spec", [s for s in comparison_specs() if s.n1 == 1000], ids=lambda s: f"r{s.rank}")
def test_c4_comparison_1000(report, spec):
    ok, detail = _compare_row(spec, 5, 2 * LARGE_ROWS[(spec.n1, spec.rank)])
    report("C4 1000x1000 comparison", ok, detail)


def test_c5_information_limit(report):
    t0 = time.perf_counter()
    spec = ProblemSpec(40, 40, 8, fraction=0.05, seed=0)
    assert spec.sample_count == 80 < spec.degrees_of_freedom == 576
    recs = run_benchmark([spec], ("asvt",), SolverConfig(), trials=10)
    # a solver failure (NaN error) counts as failed recovery
    failed = sum(not (r.relative_error <= 1e-1) for r in recs)
    elapsed = time.perf_counter() - t0
    report("C5 information limit", failed >= 9 and elapsed < 60,
           f"{failed}/10 trials with RE > 0.1 (>= 9), {elapsed:.1f}s (< 60s)")


@pytest.mark.slow
def test_c6_phase_transition(report):
    t0 = time.perf_counter()
    axis = uniform_axis(8)
    grid = run_phase_transition(40, 40, sampling=axis, freedom=axis, trials_per_cell=25,
                                success_threshold=1e-3, seed=0)
    elapsed = time.perf_counter() - t0
    d_r = grid.ranks * (80 - grid.ranks)
    under = d_r > grid.samples
    worst_under = float(grid.cells[under].max()) if under.any() else 0.0
    i = int(np.argmin(np.abs(grid.axis_freedom - 0.1)))
    j = int(np.argmin(np.abs(grid.axis_sampling - 0.9)))
    anchor = float(grid.cells[i, j])
    drops = [int(np.sum(np.diff(row) < 0)) for row in grid.cells]
    ok = worst_under <= 0.04 and anchor >= 0.9 and max(drops) <= 1 and elapsed < 900
    report("C6 phase transition", ok,
           f"{int(under.sum())} under-determined cells, max success {worst_under:.2f} (<= 0.04); "
           f"cell ({grid.axis_sampling[j]}, {grid.axis_freedom[i]}) success {anchor:.2f} (>= 0.9); "
           f"most drops in a row {max(drops)} (<= 1); {elapsed:.0f}s (< 900s)")


def test_c7_determinism(report, tmp_path):
    bench = ["benchmark", "--spec", "30x30:2:0.4", "--spec", "20x25:3:0.6",
             "--trials", "2", "--seed", "11", "--max-iters", "100"]
    phase = ["phase", "--n1", "15", "--resolution", "3", "--trials", "2",
             "--seed", "11", "--max-iters", "100"]
    same = []
    for name, argv in (("benchmark", bench), ("phase", phase)):
        outs = []
        for run in range(2):
            path = tmp_path / f"{name}{run}.csv"
            assert main(argv + ["-o", str(path)]) == 0
            outs.append(path.read_bytes())
        same.append(outs[0] == outs[1])
    report("C7 determinism", all(same),
           f"benchmark CSV identical={same[0]}, phase CSV identical={same[1]}")


@pytest.mark.slow
def test_c8_sweep_trend(report):
    t0 = time.perf_counter()
    decays = [0.01, 0.05, 0.1, 0.2]
    recs = run_sweep(SWEEP_BASE, "decay_a", decays, SolverConfig(), trials=5)
    med = [np.median([r.iterations for r in recs if r.value == a]) for a in decays]
    monotone = all(b <= a for a, b in zip(med, med[1:]))

    steps = run_sweep(SWEEP_BASE, "step_size", [0.5, 1.5], SolverConfig(), trials=5)
    times, conv = {}, {}
    for d in (0.5, 1.5):
        rows = [r for r in steps if r.value == d]
        times[d] = np.median([r.wall_time_ms for r in rows])
        conv[d] = all(r.converged for r in rows)
    timing_ok = times[1.5] <= times[0.5] if conv[0.5] and conv[1.5] else True
    elapsed = time.perf_counter() - t0
    report("C8 sweep trend", monotone and timing_ok and elapsed < 600,
           f"median iterations over decay_a {decays}: {[float(m) for m in med]} (non-increasing); "
           f"median ms delta=1.5 {times[1.5]:.0f} vs delta=0.5 {times[0.5]:.0f} "
           f"(converged {conv[1.5]}/{conv[0.5]}); {elapsed:.0f}s (< 600s)")
