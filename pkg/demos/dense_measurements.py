"""
General affine measurements
===========================

The solvers accept any linear map, not only entry sampling. Here the
measurements are inner products with random Gaussian matrices.
"""
import numpy as np

from lowrank import SolverConfig, asvt_solve, make_dense_operator
from lowrank.experiments import generate_low_rank, relative_error

rng = np.random.default_rng(0)
n1, n2, r, m = 20, 20, 2, 240
truth = generate_low_rank(n1, n2, r, seed=4)
a = rng.standard_normal((m, n1 * n2)) / np.sqrt(m)
op = make_dense_operator(a, (n1, n2))
b = op.apply(truth)

# %%
# With a non-identity A*A the step has to respect the operator norm.
step = 0.9 / np.linalg.norm(a, 2) ** 2
result = asvt_solve(op, b, SolverConfig(step_size=step, max_iters=2000))
print(f"step {step:.3f}, {result.iterations_run} iterations, converged={result.converged}")
print(f"relative error {relative_error(truth, result.x_hat):.2e}")
