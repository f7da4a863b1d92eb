import numpy as np
import pytest

from lowrank.errors import ParameterError, ShapeError
from lowrank.experiments import (
    ProblemSpec,
    comparison_specs,
    degrees_of_freedom,
    derive_seed,
    generate_low_rank,
    make_problem,
    rank_for_freedom,
    relative_error,
    run_benchmark,
    run_phase_transition,
    run_sweep,
    sample_observations,
    uniform_axis,
)
from lowrank.linalg import svd
from lowrank.solvers import SolverConfig


def test_generate_full_rank():
    s = svd(generate_low_rank(6, 9, 6, seed=1)).sigma
    assert np.all(s > 1e-9 * s[0])


def test_generate_rank_one_minors_vanish():
    m = generate_low_rank(7, 5, 1, seed=2)
    scale = np.abs(m).max() ** 2
    for i in range(6):
        for j in range(4):
            minor = m[i, j] * m[i + 1, j + 1] - m[i, j + 1] * m[i + 1, j]
            assert abs(minor) <= 1e-10 * scale


def test_generate_determinism():
    np.testing.assert_array_equal(generate_low_rank(10, 8, 3, 5), generate_low_rank(10, 8, 3, 5))
    assert not np.array_equal(generate_low_rank(10, 8, 3, 5), generate_low_rank(10, 8, 3, 6))


@pytest.mark.parametrize("n1, n2, r", [(30, 30, 3), (50, 20, 7), (12, 40, 12)])
def test_generate_exact_rank(n1, n2, r):
    s = svd(generate_low_rank(n1, n2, r, seed=r)).sigma
    assert np.count_nonzero(s > 1e-9 * s[0]) == r


def test_generate_rejects_bad_rank():
    with pytest.raises(ParameterError):
        generate_low_rank(3, 4, 5, seed=0)


def test_sample_all_and_one():
    obs = sample_observations(3, 4, 12, seed=0)
    assert sorted(obs.pairs()) == [(i, j) for i in range(3) for j in range(4)]
    one = sample_observations(3, 4, 1, seed=0)
    (i, j), = one.pairs()
    assert 0 <= i < 3 and 0 <= j < 4


@pytest.mark.parametrize("m", [0, 13, -1])
def test_sample_count_out_of_range(m):
    with pytest.raises(ParameterError):
        sample_observations(3, 4, m, seed=0)


def test_sampling_is_uniform_over_cells():
    n1 = n2 = 50
    m, runs = 500, 10_000
    counts = np.zeros(n1 * n2)
    for s in range(runs):
        counts[sample_observations(n1, n2, m, seed=s).flat_indices] += 1
    freq = counts / runs
    p = m / (n1 * n2)
    se = np.sqrt(p * (1 - p) / runs)
    assert np.all(np.abs(freq - p) <= 5 * se)


def test_relative_error_examples():
    x = np.diag([3.0, 4.0])
    assert relative_error(x, x) == 0.0
    assert relative_error(x, np.zeros((2, 2))) == 1.0
    assert relative_error(x, np.diag([3.0, 0.0])) == pytest.approx(0.8)
    with pytest.raises(ParameterError):
        relative_error(np.zeros((2, 2)), x)
    with pytest.raises(ShapeError):
        relative_error(x, np.zeros((2, 3)))


@pytest.mark.parametrize("n1, n2, r, d", [(80, 80, 0, 0), (80, 80, 4, 624), (80, 80, 10, 1500)])
def test_degrees_of_freedom(n1, n2, r, d):
    assert degrees_of_freedom(n1, n2, r) == d


def test_rank_for_freedom_is_closest_integer():
    for n1, n2 in [(40, 40), (80, 80), (30, 50)]:
        for target in np.linspace(1, n1 * n2, 57):
            r = rank_for_freedom(n1, n2, target)
            best = min(range(1, min(n1, n2) + 1), key=lambda q: abs(degrees_of_freedom(n1, n2, q) - target))
            assert abs(degrees_of_freedom(n1, n2, r) - target) == abs(degrees_of_freedom(n1, n2, best) - target)


def test_problem_spec_validation():
    assert ProblemSpec(10, 10, 2, fraction=0.155).sample_count == 16
    with pytest.raises(ParameterError):
        ProblemSpec(10, 10, 11, fraction=0.5)
    with pytest.raises(ParameterError):
        ProblemSpec(10, 10, 2)
    with pytest.raises(ParameterError):
        ProblemSpec(10, 10, 2, fraction=0.5, samples=3)
    with pytest.raises(ParameterError):
        ProblemSpec(10, 10, 2, fraction=1.5)
    with pytest.raises(ParameterError):
        ProblemSpec(10, 10, 2, samples=101)


def test_derive_seed_is_pure_and_sensitive():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert len({derive_seed(1, 2, 3), derive_seed(1, 3, 2), derive_seed(2, 2, 3), derive_seed(1, 2)}) == 4
    assert 0 <= derive_seed(2**64 - 1, 5) < 2**63


SMALL = [ProblemSpec(20, 20, 2, fraction=0.5, seed=3), ProblemSpec(15, 25, 1, fraction=0.4, seed=3)]


def test_benchmark_ordering_and_determinism():
    cfg = SolverConfig(max_iters=80)
    a = run_benchmark(SMALL, ("asvt", "svt"), cfg, trials=3)
    b = run_benchmark(SMALL, ("asvt", "svt"), cfg, trials=3)
    keys = [(SMALL.index(r.spec), r.algorithm, r.trial) for r in a]
    assert keys == [(s, alg, t) for s in range(2) for alg in ("asvt", "svt") for t in range(3)]
    strip = lambda rs: [(r.seed, r.iterations, r.relative_error, r.converged) for r in rs]
    assert strip(a) == strip(b)
    # both algorithms see the same problem instance
    assert a[0].seed == a[3].seed
    assert a[0].seed == derive_seed(3, 0, 0)


def test_benchmark_recomputes_error_from_ground_truth():
    (rec,) = run_benchmark(SMALL[:1], ("asvt",), SolverConfig(max_iters=80), trials=1)
    from lowrank.solvers import asvt_solve

    p = make_problem(SMALL[0], rec.seed)
    res = asvt_solve(p.op, p.b, SolverConfig(max_iters=80))
    assert rec.relative_error == relative_error(p.matrix, res.x_hat)
    assert rec.iterations == res.iterations_run >= 1


def test_benchmark_records_failures_without_aborting():
    recs = run_benchmark(SMALL, ("asvt",), SolverConfig(step_size=5.0), trials=1)
    assert len(recs) == 2
    for r in recs:
        assert not r.converged
        assert "DivergenceError" in r.note
        assert np.isnan(r.relative_error)


def test_threads_do_not_change_results(monkeypatch):
    cfg = SolverConfig(max_iters=60)
    monkeypatch.setenv("LOWRANK_THREADS", "1")
    serial = run_benchmark(SMALL, ("asvt", "svt"), cfg, trials=2)
    monkeypatch.setenv("LOWRANK_THREADS", "4")
    parallel = run_benchmark(SMALL, ("asvt", "svt"), cfg, trials=2)
    strip = lambda rs: [(r.algorithm, r.trial, r.seed, r.iterations, r.relative_error) for r in rs]
    assert strip(serial) == strip(parallel)


def test_bad_thread_setting(monkeypatch):
    monkeypatch.setenv("LOWRANK_THREADS", "many")
    with pytest.raises(ParameterError):
        run_benchmark(SMALL, ("asvt",), SolverConfig(max_iters=5))


def test_singleton_sweep_matches_benchmark_row():
    cfg = SolverConfig(max_iters=80)
    base = SMALL[0]
    (sw,) = run_sweep(base, "decay_a", [0.05], cfg, trials=1)
    from lowrank.solvers import ThresholdSchedule

    (bm,) = run_benchmark([base], ("asvt",), cfg.replace(schedule=ThresholdSchedule(None, 0.05)), 1)
    assert (sw.seed, sw.iterations, sw.relative_error, sw.converged) == (
        bm.seed, bm.iterations, bm.relative_error, bm.converged,
    )
    assert sw.param == "decay_a" and sw.value == 0.05


def test_sweep_keeps_input_order():
    recs = run_sweep(SMALL[0], "step_size", [1.0, 0.5], SolverConfig(max_iters=40), trials=2)
    assert [(r.value, r.trial) for r in recs] == [(1.0, 0), (1.0, 1), (0.5, 0), (0.5, 1)]


@pytest.mark.parametrize(
    "param, values", [("decay_a", []), ("decay_a", [0.1, -0.1]), ("tolerance", [0.1])]
)
def test_sweep_validation(param, values):
    with pytest.raises(ParameterError):
        run_sweep(SMALL[0], param, values)


def test_uniform_axis():
    np.testing.assert_allclose(uniform_axis(4), [0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ParameterError):
        uniform_axis(0)


def test_phase_grid_small():
    grid = run_phase_transition(
        20, 20, sampling=[0.05, 1.0], freedom=[0.05, 1.0],
        trials_per_cell=3, cfg=SolverConfig(max_iters=200), seed=1,
    )
    assert grid.shape == (2, 2)
    assert np.all((grid.cells >= 0) & (grid.cells <= 1))
    np.testing.assert_array_equal(grid.cells, grid.successes / 3)
    # full sampling, small rank: certain recovery
    assert grid.ranks[0, 1] == 1 and grid.samples[0, 1] == 400
    assert grid.cells[0, 1] == 1.0
    # rank clamps to 1 at 20 samples, leaving d_r = 39 > m
    under = grid.ranks * (40 - grid.ranks) > grid.samples
    assert under.any()
    assert np.all(grid.cells[under] == 0.0)


def test_phase_grid_is_deterministic():
    kw = dict(sampling=[0.3, 0.8], freedom=[0.2], trials_per_cell=2, cfg=SolverConfig(max_iters=60), seed=4)
    a = run_phase_transition(15, 15, **kw)
    b = run_phase_transition(15, 15, **kw)
    np.testing.assert_array_equal(a.cells, b.cells)
    np.testing.assert_array_equal(a.ranks, b.ranks)


@pytest.mark.parametrize(
    "kw",
    [dict(sampling=[]), dict(freedom=[0.0]), dict(sampling=[1.2]), dict(trials_per_cell=0)],
)
def test_phase_grid_validation(kw):
    with pytest.raises(ParameterError):
        run_phase_transition(10, 10, **kw)


def test_table_specs():
    desk = comparison_specs()
    assert [(s.n1, s.rank, s.fraction) for s in desk[:3]] == [(500, 10, 0.15), (500, 50, 0.4), (500, 100, 0.5)]
    assert max(s.n1 for s in desk) == 1000
    assert max(s.n1 for s in comparison_specs(large=True)) == 3000
