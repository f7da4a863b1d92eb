"""
Decay rate and step size
========================

A faster threshold decay, or a longer step, shortens the run.
"""
import numpy as np

from lowrank import SolverConfig
from lowrank.experiments import ProblemSpec, run_sweep

base = ProblemSpec(150, 150, 5, fraction=1 / 3, seed=3)

for param, values in (("decay_a", [0.01, 0.05, 0.1, 0.2]), ("step_size", [0.5, 1.0, 1.5])):
    records = run_sweep(base, param, values, SolverConfig(), trials=3)
    print(param)
    for v in values:
        rows = [r for r in records if r.value == v]
        print(f"  {v:5.2f}  median iters {np.median([r.iterations for r in rows]):5.0f}"
              f"  median ms {np.median([r.wall_time_ms for r in rows]):8.1f}"
              f"  median RE {np.median([r.relative_error for r in rows]):.2e}")
