"""
Phase transition
================

Estimate recovery probability over sampling fraction and d_r/m, then
save the grid as a PGM image (white means every trial recovered).
"""
import numpy as np

from lowrank import SolverConfig
from lowrank.experiments import run_phase_transition, uniform_axis
from lowrank.io import emit_phase_pgm, phase_csv

axis = uniform_axis(6)
grid = run_phase_transition(24, 24, sampling=axis, freedom=axis, trials_per_cell=4,
                            cfg=SolverConfig(max_iters=300), seed=5)

# %%
# Rows are d_r/m, columns the sampling fraction.
np.set_printoptions(precision=2)
print(grid.cells[::-1])

# %%
emit_phase_pgm("phase.pgm", grid)
with open("phase.csv", "w") as f:
    f.write(phase_csv(grid))
print("wrote phase.pgm and phase.csv")
