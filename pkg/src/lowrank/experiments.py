"""Random problem generation, metrics and the experiment drivers.

Seeding
-------
Every random draw comes from a generator seeded by :func:`derive_seed`, a
pure function of a base seed and a tuple of integer keys (built on
``numpy.random.SeedSequence``). The drivers use

* benchmark / sweep trial:  ``derive_seed(spec.seed, spec_index, trial)``
* phase-grid trial:         ``derive_seed(seed, freedom_index, sampling_index, trial)``

and a trial seed ``s`` yields the matrix from ``generate_low_rank(..., s)``
and the index set from ``sample_observations(..., derive_seed(s, 1))``.
The algorithm is deliberately not part of the key so that every algorithm
sees the same problem instance.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import LowRankError, ParameterError, ShapeError
from .linalg import as_matrix
from .operators import ObservationSet, make_sampling_operator
from .solvers import SolverConfig, ThresholdSchedule, solve

__all__ = [
    "ProblemSpec",
    "Problem",
    "BenchmarkRecord",
    "PhaseGrid",
    "derive_seed",
    "generate_low_rank",
    "sample_observations",
    "make_problem",
    "relative_error",
    "degrees_of_freedom",
    "rank_for_freedom",
    "uniform_axis",
    "run_benchmark",
    "run_sweep",
    "run_phase_transition",
    "comparison_specs",
    "SWEEP_BASE",
]

THREADS_ENV = "LOWRANK_THREADS"


def derive_seed(base, *keys):
    """Deterministic 63-bit seed from a base seed and integer keys."""
    ss = np.random.SeedSequence([int(base)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class ProblemSpec:
    """Size, rank and sampling level of a random completion problem.

    Give exactly one of `samples` (the count m) or `fraction` (m / (n1*n2));
    a fraction is converted with ``max(1, round(fraction * n1 * n2))``.
    """

    n1: int
    n2: int
    rank: int
    fraction: Optional[float] = None
    samples: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ParameterError(f"dimensions must be positive, got {self.n1}x{self.n2}")
        if not 1 <= self.rank <= min(self.n1, self.n2):
            raise ParameterError(
                f"rank must be in [1, {min(self.n1, self.n2)}], got {self.rank}"
            )
        if (self.fraction is None) == (self.samples is None):
            raise ParameterError("give exactly one of fraction or samples")
        if self.fraction is not None and not 0 < self.fraction <= 1:
            raise ParameterError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.samples is not None and not 1 <= self.samples <= self.n1 * self.n2:
            raise ParameterError(
                f"samples must be in [1, {self.n1 * self.n2}], got {self.samples}"
            )
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @property
    def sample_count(self):
        if self.samples is not None:
            return self.samples
        return max(1, int(round(self.fraction * self.n1 * self.n2)))

    @property
    def sample_fraction(self):
        return self.sample_count / (self.n1 * self.n2)

    @property
    def degrees_of_freedom(self):
        return degrees_of_freedom(self.n1, self.n2, self.rank)


class Problem(NamedTuple):
    matrix: np.ndarray
    obs: ObservationSet
    op: object
    b: np.ndarray
    seed: int


@dataclass
class BenchmarkRecord:
    spec: ProblemSpec
    algorithm: str
    trial: int
    seed: int
    iterations: int
    relative_error: float
    wall_time_ms: float
    converged: bool
    note: str = ""
    param: Optional[str] = None
    value: Optional[float] = None


@dataclass
class PhaseGrid:
    """Success probabilities over (sampling fraction, d_r/m).

    Arrays are indexed ``[freedom_index, sampling_index]``. Skipped cells
    (no admissible rank or sample count) hold NaN in `cells` and 0 in the
    integer arrays.
    """

    n1: int
    n2: int
    axis_sampling: np.ndarray
    axis_freedom: np.ndarray
    cells: np.ndarray
    successes: np.ndarray
    ranks: np.ndarray
    samples: np.ndarray
    trials_per_cell: int
    success_threshold: float

    @property
    def realized_sampling(self):
        return self.samples / (self.n1 * self.n2)

    @property
    def realized_freedom(self):
        dof = self.ranks * (self.n1 + self.n2 - self.ranks)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.samples > 0, dof / np.maximum(self.samples, 1), np.nan)

    @property
    def shape(self):
        return self.cells.shape


def generate_low_rank(n1, n2, r, seed):
    """Random rank-``r`` matrix ``A @ B`` with i.i.d. standard normal factors."""
    if not 1 <= r <= min(n1, n2):
        raise ParameterError(f"rank must be in [1, {min(n1, n2)}], got {r}")
    rng = np.random.default_rng(int(seed))
    left = rng.standard_normal((n1, r))
    right = rng.standard_normal((r, n2))
    return left @ right


def sample_observations(n1, n2, m, seed):
    """Uniformly random size-``m`` subset of the ``n1 x n2`` positions.

    Drawn without replacement; returned in row-major order.
    """
    if not 1 <= m <= n1 * n2:
        raise ParameterError(f"sample count must be in [1, {n1 * n2}], got {m}")
    rng = np.random.default_rng(int(seed))
    flat = np.sort(rng.choice(n1 * n2, size=int(m), replace=False))
    rows, cols = np.divmod(flat, n2)
    return ObservationSet((n1, n2), rows, cols)


def make_problem(spec, seed):
    matrix = generate_low_rank(spec.n1, spec.n2, spec.rank, seed)
    obs = sample_observations(spec.n1, spec.n2, spec.sample_count, derive_seed(seed, 1))
    op = make_sampling_operator(obs)
    return Problem(matrix, obs, op, op.apply(matrix), seed)


def relative_error(x_true, x_hat):
    """``||x_hat - x_true||_F / ||x_true||_F``."""
    x_true = as_matrix(x_true, "x_true")
    x_hat = as_matrix(x_hat, "x_hat")
    if x_true.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch {x_true.shape} vs {x_hat.shape}")
    denom = np.linalg.norm(x_true)
    if denom == 0:
        raise ParameterError("relative error undefined for a zero reference matrix")
    return float(np.linalg.norm(x_hat - x_true) / denom)


def degrees_of_freedom(n1, n2, r):
    """Parameter count ``r * (n1 + n2 - r)`` of a rank-r n1 x n2 matrix."""
    if not 0 <= r <= min(n1, n2):
        raise ParameterError(f"rank must be in [0, {min(n1, n2)}], got {r}")
    return r * (n1 + n2 - r)


def rank_for_freedom(n1, n2, target):
    """Integer rank in ``[1, min(n1, n2)]`` whose d_r is closest to `target`.

    Solves ``r**2 - (n1 + n2) r + target = 0`` for the smaller root and
    compares its floor and ceiling.
    """
    s = n1 + n2
    disc = max(s * s - 4.0 * target, 0.0)
    root = (s - math.sqrt(disc)) / 2.0
    lo, hi = 1, min(n1, n2)
    candidates = {min(max(c, lo), hi) for c in (math.floor(root), math.ceil(root))}
    return min(sorted(candidates), key=lambda r: abs(degrees_of_freedom(n1, n2, r) - target))


def uniform_axis(resolution):
    """``resolution`` equally spaced values ``1/res, 2/res, ..., 1``."""
    if resolution < 1:
        raise ParameterError("axis resolution must be at least 1")
    return np.arange(1, resolution + 1) / resolution


def _threads():
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ParameterError(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def _ordered_map(func, items):
    items = list(items)
    workers = min(_threads(), len(items))
    if workers <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _trial(spec, algorithm, cfg, trial, seed, param=None, value=None):
    problem = make_problem(spec, seed)
    try:
        result = solve(algorithm, problem.op, problem.b, cfg)
    except LowRankError as exc:
        return BenchmarkRecord(
            spec, algorithm, trial, seed,
            iterations=getattr(exc, "iteration", None) or 0,
            relative_error=float("nan"),
            wall_time_ms=float("nan"),
            converged=False,
            note=f"{type(exc).__name__}: {exc}",
            param=param,
            value=value,
        )
    return BenchmarkRecord(
        spec, algorithm, trial, seed,
        iterations=result.iterations_run,
        relative_error=relative_error(problem.matrix, result.x_hat),
        wall_time_ms=result.wall_time_ms,
        converged=result.converged,
        param=param,
        value=value,
    )


def run_benchmark(specs, algorithms=("asvt", "svt"), cfg=None, trials=1):
    """Solve every ``spec x algorithm x trial`` combination.

    Records come back in spec order, then algorithm order, then trial
    index. A solver failure is recorded on its row (``converged=False``,
    ``relative_error=nan``, message in ``note``) and does not stop the
    batch.
    """
    cfg = cfg or SolverConfig()
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    for alg in algorithms:
        if alg not in ("asvt", "svt"):
            raise ParameterError(f"unknown algorithm {alg!r}")
    jobs = [
        (spec, alg, t, derive_seed(spec.seed, i, t))
        for i, spec in enumerate(specs)
        for alg in algorithms
        for t in range(trials)
    ]
    return _ordered_map(lambda j: _trial(j[0], j[1], cfg, j[2], j[3]), jobs)


# 300 x 300, rank 10, one third observed
SWEEP_BASE = ProblemSpec(300, 300, 10, fraction=1 / 3)


def run_sweep(base, param, values, cfg=None, trials=1):
    """ASVT on `base` for each value of `param` (``"decay_a"`` or ``"step_size"``).

    Other settings stay as in `cfg`. Trial ``t`` uses the same problem
    instance for every value. Records are ordered by value (input order),
    then trial.
    """
    cfg = cfg or SolverConfig()
    values = list(values)
    if not values:
        raise ParameterError("sweep needs at least one value")
    if any(not v > 0 for v in values):
        raise ParameterError("sweep values must be positive")
    if param not in ("decay_a", "step_size"):
        raise ParameterError(f"cannot sweep {param!r}; use decay_a or step_size")
    if trials < 1:
        raise ParameterError("trials must be at least 1")

    def config_for(v):
        if param == "decay_a":
            return cfg.replace(schedule=ThresholdSchedule(cfg.schedule.scale_b, float(v)))
        return cfg.replace(step_size=float(v))

    jobs = [(v, t, derive_seed(base.seed, 0, t)) for v in values for t in range(trials)]
    return _ordered_map(
        lambda j: _trial(base, "asvt", config_for(j[0]), j[1], j[2], param, float(j[0])),
        jobs,
    )


def run_phase_transition(
    n1,
    n2,
    sampling=None,
    freedom=None,
    trials_per_cell=100,
    success_threshold=1e-3,
    cfg=None,
    seed=0,
    algorithm="asvt",
):
    """Monte-Carlo success probabilities over a (m/(n1 n2), d_r/m) grid.

    For each cell the sample count is ``round(sampling * n1 * n2)`` and
    the rank is :func:`rank_for_freedom` of ``freedom * m``; the realised
    values are stored on the grid. A trial succeeds when the relative
    error is strictly below `success_threshold`. Axes default to a
    20-point uniform grid on (0, 1].
    """
    cfg = cfg or SolverConfig()
    sampling = uniform_axis(20) if sampling is None else np.asarray(sampling, float)
    freedom = uniform_axis(20) if freedom is None else np.asarray(freedom, float)
    for name, axis in (("sampling", sampling), ("freedom", freedom)):
        if axis.ndim != 1 or axis.size == 0:
            raise ParameterError(f"{name} axis must be a non-empty list")
        if np.any(axis <= 0) or np.any(axis > 1):
            raise ParameterError(f"{name} axis values must lie in (0, 1]")
    if trials_per_cell < 1:
        raise ParameterError("trials_per_cell must be at least 1")
    if not success_threshold > 0:
        raise ParameterError("success_threshold must be positive")

    shape = (freedom.size, sampling.size)
    ranks = np.zeros(shape, dtype=np.int64)
    samples = np.zeros(shape, dtype=np.int64)
    jobs = []
    for i, fr in enumerate(freedom):
        for j, sf in enumerate(sampling):
            m = int(round(sf * n1 * n2))
            if m < 1:
                continue
            r = rank_for_freedom(n1, n2, fr * m)
            ranks[i, j] = r
            samples[i, j] = m
            spec = ProblemSpec(n1, n2, r, samples=m)
            for t in range(trials_per_cell):
                jobs.append((i, j, spec, derive_seed(seed, i, j, t)))

    def run(job):
        i, j, spec, s = job
        rec = _trial(spec, algorithm, cfg, 0, s)
        return i, j, bool(rec.relative_error < success_threshold)

    successes = np.zeros(shape, dtype=np.int64)
    for i, j, ok in _ordered_map(run, jobs):
        successes[i, j] += ok
    cells = np.where(samples > 0, successes / trials_per_cell, np.nan)
    return PhaseGrid(
        n1, n2, sampling, freedom, cells, successes, ranks, samples,
        int(trials_per_cell), float(success_threshold),
    )


def comparison_specs(large=False, seed=0):
    """Problem specs of the ASVT-vs-SVT comparison table.

    The default covers the 500 x 500 and 1000 x 1000 rows; ``large=True``
    adds the 1500 to 3000 rows.
    """
    rows = [
        (500, 10, 0.15), (500, 50, 0.4), (500, 100, 0.5),
        (1000, 10, 0.15), (1000, 50, 0.4), (1000, 100, 0.5),
    ]
    if large:
        rows += [
            (1500, 10, 0.15), (1500, 50, 0.4), (1500, 100, 0.5),
            (2000, 10, 0.1), (2000, 50, 0.3), (2000, 100, 0.4),
            (2500, 10, 0.1), (2500, 50, 0.25), (2500, 100, 0.3),
            (3000, 10, 0.05), (3000, 50, 0.25), (3000, 100, 0.3),
        ]
    return [ProblemSpec(n, n, r, fraction=f, seed=seed) for n, r, f in rows]
