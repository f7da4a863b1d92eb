"""
Completing a low-rank matrix
============================

Hide most entries of a rank-3 matrix and recover them with ASVT.
"""
import numpy as np

from lowrank import SolverConfig, asvt_solve, make_sampling_operator
from lowrank.experiments import ProblemSpec, make_problem, relative_error

# %%
# A 120 x 100 matrix of rank 3, with 30% of its entries observed.
spec = ProblemSpec(120, 100, 3, fraction=0.3, seed=7)
problem = make_problem(spec, spec.seed)
print(f"{len(problem.obs)} of {120 * 100} entries observed")

# %%
# The solver only sees the sampling operator and the observed values.
result = asvt_solve(problem.op, problem.b, SolverConfig())
print(f"stopped after {result.iterations_run} iterations, converged={result.converged}")
print(f"relative error {relative_error(problem.matrix, result.x_hat):.2e}")

# %%
# The threshold shrinks geometrically, and the change between iterates
# collapses once it passes the smallest signal singular value.
for k in (0, 9, 19, 39):
    if k < len(result.trace):
        rec = result.trace[k]
        print(f"k={k + 1:3d}  tau={rec.threshold:10.3e}  change={rec.change:10.3e}")

# %%
# Observed entries are matched closely.
fit = make_sampling_operator(problem.obs).apply(result.x_hat)
print("max residual on observed entries:", np.abs(fit - problem.b).max())
