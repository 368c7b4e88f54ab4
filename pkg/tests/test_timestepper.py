import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemoflow import (
    BlowUpSuspected,
    Grid,
    ModelParams,
    PotentialSpec,
    ScalarField,
    SensitivitySpec,
    StepRejected,
    VectorField,
)
from chemoflow.harness import make_initial_data, parse_config
from chemoflow.stokes import StokesState
from chemoflow.timestepper import Problem, State, choose_dt, run_to_time, stable_dt, step_c, step_coupled, step_n


def _problem(grid, m=1.5, eps=0.1, family="rotational", coeffs=(1.0,), phi=None, **kw):
    dim = grid.ndim
    return Problem(ModelParams(m=m, epsilon=eps, dim=dim), SensitivitySpec(family, coeffs, theta=0.6, dim=dim),
                   PotentialSpec(phi if phi is not None else [0.0] * dim), grid, **kw)


def _state(grid, n, c, u=None, t=0.0):
    u = u if u is not None else VectorField.zeros(grid)
    return State(ScalarField(grid, np.asarray(n, dtype=float) * np.ones(grid.dims)),
                 ScalarField(grid, np.asarray(c, dtype=float) * np.ones(grid.dims)),
                 StokesState(u, ScalarField.zeros(grid)), t)


def _smooth_state(grid, seed=0, u_amp=0.2):
    cfg = parse_config({"dim": grid.ndim, "grid": {"dims": list(grid.dims), "extents": list(grid.extents)},
                        "initial": {"u_amplitude": u_amp}, "seed": seed})
    return State.initial(make_initial_data(grid, cfg.initial, seed))


def test_stable_dt_diffusive_value():
    g = Grid.unit(64)
    pb = _problem(g, m=2.0, eps=0.1, family="scalar", coeffs=(0.0,))
    h = 1.0 / 64
    assert stable_dt(_state(g, 0.0, 0.0), pb) == pytest.approx(0.9 * h * h / (4 * 0.1 * 1.0), rel=1e-14)
    assert stable_dt(_state(g, 0.0, 0.0), pb) == pytest.approx(5.4931640625e-4, rel=1e-14)


def test_stable_dt_advective_scaling():
    g = Grid.unit(64)
    pb = _problem(g, m=2.0, eps=0.1, family="scalar", coeffs=(0.0,))
    u = VectorField(g, [np.full(g.face_shape(0), 100.0), np.zeros(g.face_shape(1))])
    dt1 = stable_dt(_state(g, 0.0, 0.0, u), pb)
    dt2 = stable_dt(_state(g, 0.0, 0.0, u * 2.0), pb)
    assert dt1 == pytest.approx(0.9 / 64 / 100)
    assert dt2 == pytest.approx(dt1 / 2, rel=1e-14)


def test_stable_dt_zero_state_floor():
    g = Grid.unit(16)
    pb = _problem(g, m=1.5, eps=0.1)
    h = 1 / 16
    assert stable_dt(State.zeros(g), pb) == pytest.approx(0.9 * h * h / (4 * 0.1**0.5), rel=1e-14)


def test_choose_dt_respects_fixed_and_horizon(grid2):
    pb = _problem(grid2, fixed_dt=0.25)
    st_ = _state(grid2, 1.0, 1.0)
    assert choose_dt(st_, pb) == 0.25
    assert choose_dt(st_, pb, horizon=0.1) == pytest.approx(0.1)


def test_step_n_constant_is_fixed_point(grid2):
    pb = _problem(grid2)
    st_ = _state(grid2, 0.7, 0.3)
    assert np.array_equal(step_n(st_, 1e-3, pb).data, st_.n.data)


def test_step_n_rejects_negativity(grid2):
    st_ = _smooth_state(grid2)
    with pytest.raises(StepRejected):
        step_n(st_, 10.0, _problem(grid2))


def test_mass_after_many_random_steps():
    g = Grid((12, 10), (1.0, 1.2))
    r = np.random.default_rng(5)
    pb = _problem(g, m=1.8, eps=0.2, family="saturating", coeffs=(0.3, 1.0), phi=[0.5, -1.0])
    st_ = _smooth_state(g, seed=3, u_amp=0.5)
    m0 = st_.n.data.sum()
    for k in range(1000):
        # random coefficients: perturb c and u every step
        c = st_.c.data * r.uniform(0.9, 1.0, g.dims)
        st_ = State(st_.n, ScalarField(g, c), st_.stokes, st_.t, st_.step)
        st_ = State(step_n(st_, 0.5 * choose_dt(st_, pb), pb), st_.c, st_.stokes, st_.t, st_.step)
    assert abs(st_.n.data.sum() - m0) <= 1e-12 * m0


def test_step_c_uniform_ode():
    g = Grid.unit(8)
    n_star, c_star, dt = 1.3, 0.8, 1e-3
    st_ = _state(g, n_star, c_star)
    for _ in range(1000):
        st_ = State(st_.n, step_c(st_, dt), st_.stokes)
    assert np.allclose(st_.c.data, c_star * (1 - dt * n_star) ** 1000, rtol=1e-12)
    assert np.abs(st_.c.data - c_star * math.exp(-n_star)).max() <= 1e-3


def test_step_c_neumann_mode_decay():
    L = 1.0
    g = Grid((32, 4), (L, 0.125))
    x, _ = g.cell_coords()
    mode = np.cos(np.pi * x / L)
    st_ = _state(g, 0.0, 1.0 + 0.5 * mode)
    dt, k = 1e-4, 200
    for _ in range(k):
        st_ = State(st_.n, step_c(st_, dt), st_.stokes)
    h = g.h[0]
    lam = 2 * (1 - math.cos(math.pi * h / L)) / h**2
    amp = np.sum((st_.c.data - 1.0) * mode) / np.sum(mode * mode)
    assert amp == pytest.approx(0.5 * (1 - dt * lam) ** k, rel=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_step_c_maximum_principle(seed):
    g = Grid((10, 10), (1.0, 1.0))
    st_ = _smooth_state(g, seed=seed % 1000, u_amp=1.0)
    pb = _problem(g)
    new = step_c(st_, choose_dt(st_, pb), pb)
    assert new.data.max() <= st_.c.data.max() + 1e-12
    assert new.data.min() >= 0.0


def test_step_c_rejects_overshoot(grid2):
    st_ = _smooth_state(grid2)
    with pytest.raises(StepRejected):
        step_c(st_, 1.0)


def test_zero_state_is_equilibrium(grid2):
    pb = _problem(grid2, phi=[0.0, -1.0])
    st_ = State.zeros(grid2)
    for _ in range(5):
        st_, rep = step_coupled(st_, pb)
        assert rep.ok
    assert not st_.n.data.any() and not st_.c.data.any() and st_.u.max_abs() == 0.0


def test_uniform_state_reduces_to_ode(grid2):
    pb = _problem(grid2, fixed_dt=1e-3)
    st_ = _state(grid2, 2.0, 1.0)
    for _ in range(100):
        st_, _ = step_coupled(st_, pb)
    assert np.all(st_.n.data == 2.0)
    assert np.allclose(st_.c.data, (1 - 2e-3) ** 100, rtol=1e-12)
    assert st_.u.max_abs() == 0.0
    assert st_.t == pytest.approx(0.1)


def test_random_smooth_run_keeps_invariants():
    g = Grid.unit(16)
    pb = _problem(g, phi=[0.0, -1.0])
    st_ = _smooth_state(g, seed=11, u_amp=0.3)
    m0 = st_.n.data.sum()
    cmax = st_.c.data.max()
    for _ in range(500):
        st_, rep = step_coupled(st_, pb)
        assert rep.ok, rep.checks
        assert rep.n_min >= 0.0 and rep.c_min >= 0.0 and rep.c_max <= cmax + 1e-12
        assert rep.cfl_advective <= 1.0 and rep.cfl_diffusive <= 1.0
    assert abs(st_.n.data.sum() - m0) <= 1e-12 * m0


def test_run_to_zero_horizon(grid2):
    st_ = _smooth_state(grid2)
    res = run_to_time(st_, 0.0, _problem(grid2))
    assert res.state is st_ and len(res.series) == 0


def test_cadence_changes_only_series_length():
    g = Grid.unit(12)
    pb = _problem(g, phi=[0.0, -1.0])
    st_ = _smooth_state(g, seed=2, u_amp=0.2)
    a = run_to_time(st_, 0.05, pb, cadence=1)
    b = run_to_time(st_, 0.05, pb, cadence=10)
    for x, y in [(a.state.n, b.state.n), (a.state.c, b.state.c)]:
        assert np.array_equal(x.data, y.data)
    for x, y in zip(a.state.u.comps, b.state.u.comps):
        assert np.array_equal(x, y)
    assert len(a.series) > len(b.series) > 1
    # budgets are integrated every step whatever the cadence
    assert a.series.column("budget_grad_c_2")[-1] == b.series.column("budget_grad_c_2")[-1]


def test_theorem_regime_run_terminates_normally():
    g = Grid.unit(16)
    res = run_to_time(_smooth_state(g, u_amp=0.2), 0.05, _problem(g, m=1.5, phi=[0.0, -1.0]))
    assert not res.blowup and res.state.t == 0.05


def test_blowup_flag_after_halvings(grid2):
    pb = _problem(grid2, fixed_dt=50.0, max_halvings=3)
    with pytest.raises(BlowUpSuspected):
        step_coupled(_smooth_state(grid2), pb)
    res = run_to_time(_smooth_state(grid2), 100.0, pb)
    assert res.blowup and "halvings" in res.message
    assert len(res.series) == 1


def test_halving_recovers(grid2):
    st_ = _smooth_state(grid2)
    pb = _problem(grid2)
    dt = choose_dt(st_, pb)
    _, rep = step_coupled(st_, _problem(grid2, fixed_dt=dt * 128))
    assert rep.halvings >= 1 and rep.dt <= dt * 128 / 2 and rep.ok


def test_deterministic_replay():
    g = Grid.unit(12)
    pb = _problem(g, phi=[0.0, -1.0])
    a = run_to_time(_smooth_state(g, seed=4), 0.02, pb)
    b = run_to_time(_smooth_state(g, seed=4), 0.02, pb)
    for k in a.series.rows:
        assert np.array_equal(a.series.column(k), b.series.column(k))


def test_three_dimensional_step():
    g = Grid.unit(8, dim=3)
    pb = _problem(g, phi=[0.0, 0.0, -1.0])
    st_ = _smooth_state(g, u_amp=0.2)
    m0 = st_.n.data.sum()
    for _ in range(20):
        st_, rep = step_coupled(st_, pb)
        assert rep.ok
    assert abs(st_.n.data.sum() - m0) <= 1e-12 * m0
