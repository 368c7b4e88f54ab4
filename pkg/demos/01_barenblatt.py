"""Porous-medium sanity check against the Barenblatt profile.

With no chemical and no flow the n-equation reduces to n_t = (n^2)_xx when
C_D = m = 2.  Start from the exact profile at t=0.1 and compare at t=0.5.
"""
import numpy as np

from chemoflow import Grid, ModelParams, PotentialSpec, ScalarField, SensitivitySpec, VectorField
from chemoflow.acceptance import barenblatt
from chemoflow.stokes import StokesState
from chemoflow.timestepper import Problem, State, run_to_time

# %% setup
errors = []
for cells in (64, 128, 256):
    grid = Grid((cells,), (8.0,))
    x = grid.centers_1d(0) - 4.0
    p = ModelParams(m=2.0, kappa=0.0, c_d_lower=2.0, epsilon=1e-10, dim=1)
    problem = Problem(p, SensitivitySpec("scalar", (0.0,), dim=1), PotentialSpec([0.0]), grid)
    state = State(ScalarField(grid, barenblatt(0.1, x)), ScalarField.zeros(grid),
                  StokesState(VectorField.zeros(grid), ScalarField.zeros(grid)), t=0.1)

    # %% integrate
    res = run_to_time(state, 0.5, problem, cadence=10**9)
    err = np.sum(np.abs(res.state.n.data - barenblatt(0.5, x))) * grid.h[0]
    errors.append(err)
    print(f"{cells:4d} cells  {res.state.step:6d} steps  L1 error {err:.3e}")

# %% observed order
orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
print("orders:", np.round(orders, 2))
