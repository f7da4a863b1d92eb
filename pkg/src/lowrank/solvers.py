"""Singular value thresholding solvers for ``min rank(X)  s.t.  A(X) = b``.

``asvt_solve`` hard-thresholds the spectrum with a threshold that decays
geometrically over the iterations, ``tau_k = scale_b * exp(-decay_a * k)``.
``svt_solve`` is the classical fixed-threshold baseline built on singular
value shrinkage.

Both solvers share one driver loop. Iteration ``k`` (starting at 1)::

    X_k = threshold(Y, tau_k)
    Y   = X_k + delta_k * A*(b - A(X_k))        # ASVT, update="gradient"
    Y   = Y   + delta_k * A*(b - A(X_k))        # ASVT update="accumulate", SVT
    e   = ||X_k - X_{k-1}||_F

and the loop stops once ``e <= tolerance`` (and, by default, the relative
measurement residual is below ``residual_gate``) or after ``max_iters``
iterations.
"""
import math
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import DivergenceError, NumericalError, ParameterError, StateError
from .linalg import reconstruct, svd
from .operators import as_measurements

__all__ = [
    "ThresholdSchedule",
    "SolverConfig",
    "IterationRecord",
    "SolveResult",
    "threshold_at",
    "hard_threshold",
    "soft_threshold",
    "asvt_solve",
    "svt_solve",
    "solve",
    "AUTO_SCALE_MARGIN",
    "AUTO_TOLERANCE",
]

AUTO_SCALE_MARGIN = 1.01
AUTO_TOLERANCE = 1e-4
SVT_TAU_FACTOR = 5.0


@dataclass(frozen=True)
class ThresholdSchedule:
    """Geometric threshold schedule ``tau_k = scale_b * exp(-decay_a * k)``.

    Leaving ``scale_b`` or ``decay_a`` as ``None`` selects auto-scaling for
    that constant; it is then fixed at the start of each solve from the
    back-projected data ``A*(b)``:

    * ``scale_b = 1.01 * sigma_max(A*(b))``
    * ``decay_a = ln(scale_b / tolerance) / max_iters``
    """

    scale_b: Optional[float] = None
    decay_a: Optional[float] = None

    def __post_init__(self):
        if self.scale_b is not None and not self.scale_b > 0:
            raise ParameterError(f"scale_b must be positive, got {self.scale_b}")
        if self.decay_a is not None and not self.decay_a >= 0:
            raise ParameterError(f"decay_a must be non-negative, got {self.decay_a}")

    @property
    def mode(self):
        if self.scale_b is not None and self.decay_a is not None:
            return "explicit"
        return "auto_scale"

    @property
    def resolved(self):
        return self.mode == "explicit"

    def resolve(self, sigma_max, tolerance, max_iters):
        """Return an explicit schedule for a problem whose ``A*(b)`` has
        top singular value `sigma_max`; `tolerance` is the absolute
        stopping level."""
        scale_b = self.scale_b
        if scale_b is None:
            scale_b = AUTO_SCALE_MARGIN * sigma_max if sigma_max > 0 else 1.0
        decay_a = self.decay_a
        if decay_a is None:
            if tolerance > 0 and scale_b > tolerance:
                decay_a = math.log(scale_b / tolerance) / max_iters
            else:
                decay_a = 0.0
        return ThresholdSchedule(float(scale_b), float(decay_a))


def threshold_at(s, k):
    """Threshold level at iteration ``k >= 1``."""
    if not s.resolved:
        raise StateError("schedule has unresolved auto_scale constants")
    if k < 1:
        raise ParameterError(f"iteration index starts at 1, got {k}")
    return s.scale_b * math.exp(-s.decay_a * k)


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``tolerance=None`` means ``1e-4 * ||A*(b)||_F`` for ``stop="absolute"``
    and ``1e-4`` for ``stop="relative"`` (where the change is divided by
    ``||X_k||_F``). ``svt_tau=None`` means ``5 * sqrt(n1 * n2)``.
    ``residual_gate=None`` disables the residual condition, giving the bare
    change-based stopping rule.
    """

    schedule: ThresholdSchedule = field(default_factory=ThresholdSchedule)
    step_size: Union[float, Sequence[float]] = 1.0
    max_iters: int = 500
    tolerance: Optional[float] = None
    svt_tau: Optional[float] = None
    stop: str = "absolute"
    update: str = "gradient"
    residual_gate: Optional[float] = 1e-2
    divergence_factor: float = 1e12

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ParameterError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.tolerance is not None and not self.tolerance >= 0:
            raise ParameterError(f"tolerance must be non-negative, got {self.tolerance}")
        if self.svt_tau is not None and not self.svt_tau > 0:
            raise ParameterError(f"svt_tau must be positive, got {self.svt_tau}")
        if self.stop not in ("absolute", "relative"):
            raise ParameterError(f"stop must be 'absolute' or 'relative', got {self.stop!r}")
        if self.update not in ("gradient", "accumulate"):
            raise ParameterError(
                f"update must be 'gradient' or 'accumulate', got {self.update!r}"
            )
        if self.residual_gate is not None and not self.residual_gate >= 0:
            raise ParameterError("residual_gate must be non-negative or None")
        if not self.divergence_factor > 0:
            raise ParameterError("divergence_factor must be positive")
        if np.ndim(self.step_size) == 0:
            if not float(self.step_size) > 0:
                raise ParameterError(f"step_size must be positive, got {self.step_size}")
        else:
            steps = tuple(float(d) for d in self.step_size)
            if len(steps) < self.max_iters:
                raise ParameterError(
                    f"need {self.max_iters} step sizes, got {len(steps)}"
                )
            if not all(d > 0 for d in steps):
                raise ParameterError("all step sizes must be positive")
            object.__setattr__(self, "step_size", steps)

    def step(self, k):
        """Step size for iteration ``k`` (1-based)."""
        if isinstance(self.step_size, tuple):
            return self.step_size[k - 1]
        return float(self.step_size)

    def replace(self, **changes):
        return replace(self, **changes)


class IterationRecord(NamedTuple):
    threshold: float
    change: float  # ||X_k - X_{k-1}||_F
    residual: float  # ||b - A(X_k)||_2
    elapsed_ms: float


@dataclass
class SolveResult:
    x_hat: np.ndarray
    iterations_run: int
    converged: bool
    trace: list
    resolved_scale_b: float
    resolved_decay_a: float
    tolerance: float
    algorithm: str

    @property
    def final_k(self):
        """Value of the iteration counter on exit (one past the last iteration)."""
        return self.iterations_run + 1

    @property
    def thresholds(self):
        return np.array([r.threshold for r in self.trace])

    @property
    def changes(self):
        return np.array([r.change for r in self.trace])

    @property
    def residuals(self):
        return np.array([r.residual for r in self.trace])

    @property
    def wall_time_ms(self):
        return float(sum(r.elapsed_ms for r in self.trace))


def _hard_spectrum(sigma, tau):
    return np.where(sigma < tau, 0.0, sigma)


def _soft_spectrum(sigma, tau):
    return np.maximum(sigma - tau, 0.0)


def _check_tau(tau):
    if not tau >= 0:
        raise ParameterError(f"threshold must be non-negative, got {tau}")


def hard_threshold(x, tau):
    """Zero every singular value strictly below `tau`; keep the rest unchanged."""
    _check_tau(tau)
    u, s, v = svd(x)
    return reconstruct((u, _hard_spectrum(s, tau), v))


def soft_threshold(x, tau):
    """Singular value shrinkage: ``sigma_i -> max(sigma_i - tau, 0)``.

    This is the proximal map of ``tau * ||.||_*``.
    """
    _check_tau(tau)
    u, s, v = svd(x)
    return reconstruct((u, _soft_spectrum(s, tau), v))


def _run(op, b, cfg, algorithm, callback=None):
    b = as_measurements(b, op)
    n1, n2 = op.input_dims
    backprojected = op.adjoint(b)
    bp_norm = float(np.linalg.norm(backprojected))
    b_norm = float(np.linalg.norm(b))

    if cfg.tolerance is None:
        tol = AUTO_TOLERANCE * bp_norm if cfg.stop == "absolute" else AUTO_TOLERANCE
    else:
        tol = float(cfg.tolerance)
    tol_abs = tol if cfg.stop == "absolute" else tol * bp_norm

    if algorithm == "asvt":
        sigma_max = float(svd(backprojected).sigma[0])
        schedule = cfg.schedule.resolve(sigma_max, tol_abs, cfg.max_iters)
        shrink = _hard_spectrum
        accumulate = cfg.update == "accumulate"
    else:
        tau = cfg.svt_tau if cfg.svt_tau is not None else SVT_TAU_FACTOR * math.sqrt(n1 * n2)
        schedule = ThresholdSchedule(float(tau), 0.0)
        shrink = _soft_spectrum
        accumulate = True

    y = np.zeros((n1, n2))
    x_prev = np.zeros((n1, n2))
    blowup = cfg.divergence_factor * bp_norm
    trace = []
    converged = False
    k = 1
    while k <= cfg.max_iters:
        t0 = time.perf_counter()
        tau_k = threshold_at(schedule, k)
        try:
            u, s, v = svd(y)
        except NumericalError as exc:
            raise NumericalError(
                f"SVD failed at iteration {k}", shape=(n1, n2), iteration=k
            ) from exc
        x = reconstruct((u, shrink(s, tau_k), v))
        r = b - op.apply(x)
        step = cfg.step(k) * op.adjoint(r)
        y = y + step if accumulate else x + step
        y_norm = float(np.linalg.norm(y))
        if not math.isfinite(y_norm) or y_norm > blowup:
            raise DivergenceError(
                f"iterate diverged at iteration {k} (||Y||_F = {y_norm:.3e})",
                shape=(n1, n2),
                iteration=k,
            )
        e = float(np.linalg.norm(x - x_prev))
        res = float(np.linalg.norm(r))
        trace.append(IterationRecord(tau_k, e, res, 1e3 * (time.perf_counter() - t0)))
        if callback is not None:
            callback(k, x, y)
        x_prev = x
        k += 1

        if cfg.stop == "absolute":
            small = e <= tol
        else:
            x_norm = float(np.linalg.norm(x))
            small = e <= tol * x_norm if x_norm > 0 else e == 0.0
        gate_open = cfg.residual_gate is None or res <= cfg.residual_gate * b_norm
        if small and gate_open:
            converged = True
            break

    return SolveResult(
        x_hat=x_prev,
        iterations_run=len(trace),
        converged=converged,
        trace=trace,
        resolved_scale_b=schedule.scale_b,
        resolved_decay_a=schedule.decay_a,
        tolerance=tol,
        algorithm=algorithm,
    )


def asvt_solve(op, b, cfg=None, callback=None):
    """Recover a low-rank matrix from ``b = A(X)`` by adaptive singular value
    thresholding.

    Parameters
    ----------
    op : AffineMap
        Measurement operator.
    b : array_like, shape (op.output_dim,)
        Measurements.
    cfg : SolverConfig, optional
        Defaults to ``SolverConfig()``: auto-scaled schedule, unit step,
        500 iterations.
    callback : callable, optional
        Called as ``callback(k, x_k, y)`` after each iteration, with ``y``
        the updated iterate. Must not modify the arrays.

    Returns
    -------
    SolveResult

    Raises
    ------
    NumericalError
        SVD failure, with the iteration index attached.
    DivergenceError
        ``Y`` became non-finite or grew past ``divergence_factor * ||A*(b)||_F``.
    """
    return _run(op, b, cfg or SolverConfig(), "asvt", callback)


def svt_solve(op, b, cfg=None, callback=None):
    """Fixed-threshold singular value thresholding (shrinkage) baseline.

    Uses ``cfg.svt_tau`` (default ``5 * sqrt(n1 * n2)``) at every iteration
    and always accumulates ``Y``; otherwise behaves like :func:`asvt_solve`.
    """
    return _run(op, b, cfg or SolverConfig(), "svt", callback)


def solve(algorithm, op, b, cfg=None, callback=None):
    if algorithm == "asvt":
        return asvt_solve(op, b, cfg, callback)
    if algorithm == "svt":
        return svt_solve(op, b, cfg, callback)
    raise ParameterError(f"unknown algorithm {algorithm!r}")
