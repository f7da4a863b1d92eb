"""
ASVT against the SVT baseline
=============================

Run both solvers on identical problem instances and tabulate the result.
"""
import numpy as np

from lowrank import SolverConfig
from lowrank.experiments import ProblemSpec, run_benchmark
from lowrank.io import benchmark_csv

specs = [
    ProblemSpec(150, 150, 5, fraction=0.3, seed=1),
    ProblemSpec(200, 200, 10, fraction=0.4, seed=1),
]
records = run_benchmark(specs, ("asvt", "svt"), SolverConfig(max_iters=200), trials=2)

# %%
print(benchmark_csv(records, timing=True))

# %%
# Same seed for both algorithms: each trial sees the same matrix and mask.
for spec in specs:
    for alg in ("asvt", "svt"):
        rows = [r for r in records if r.spec == spec and r.algorithm == alg]
        it = np.median([r.iterations for r in rows])
        re = np.median([r.relative_error for r in rows])
        print(f"{spec.n1}x{spec.n2} r={spec.rank}  {alg:4s}  iters {it:5.0f}  RE {re:.2e}")
