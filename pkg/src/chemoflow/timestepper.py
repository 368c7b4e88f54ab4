"""Explicit split stepping of the regularised chemotaxis-fluid system.

One step advances ``n`` and ``c`` with the start-of-step fields (``u``
frozen), then updates the velocity with the new ``n``.  The ``n`` update is
in flux form, so mass telescopes exactly; the ``c`` update is a sum of
signed differences plus consumption, so ``0 <= c <= max c`` holds whenever
the step respects the monotonicity bound.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BlowUpSuspected, InvariantError, StepRejected
from .grid import ScalarField, VectorField
from .operators import advective_upwind_arrays, div_arrays, face_average, grad_arrays, outflow_rate, upwind_face_values
from .regularization import chemotactic_flux_arrays, chemotactic_velocity_arrays, d_eps, rho_eps
from .stokes import SolverSettings, StokesSolver, StokesState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Problem:
    """Everything that stays fixed along one trajectory."""

    params: object
    sensitivity: object
    potential: object
    grid: object
    settings: SolverSettings = field(default_factory=SolverSettings)
    safety: float = 0.9
    max_halvings: int = 10
    fixed_dt: float | None = None
    c_bound: float | None = None

    @property
    def rho(self):
        return rho_eps(self.grid, self.params.epsilon)

    def with_epsilon(self, eps):
        return replace(self, params=self.params.with_epsilon(eps))


@dataclass(frozen=True)
class State:
    n: ScalarField
    c: ScalarField
    stokes: StokesState
    t: float = 0.0
    step: int = 0

    @property
    def u(self):
        return self.stokes.u

    @classmethod
    def initial(cls, init, t=0.0):
        grid = init.n0.grid
        return cls(init.n0, init.c0, StokesState(init.u0, ScalarField.zeros(grid)), t, 0)

    @classmethod
    def zeros(cls, grid):
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid), StokesState(VectorField.zeros(grid), ScalarField.zeros(grid)))


@dataclass
class StepReport:
    dt: float
    cfl_advective: float = 0.0
    cfl_diffusive: float = 0.0
    cfl_chemotactic: float = 0.0
    halvings: int = 0
    yosida_iterations: int = 0
    poisson_residual: float = 0.0
    n_min: float = 0.0
    c_min: float = 0.0
    c_max: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(self.checks.values())


def _diffusivity_faces(n, p):
    d = d_eps(n, p)
    return [face_average(d, a) for a in range(n.ndim)]


def stable_dt(state, problem):
    """Explicit step bound ``safety * min(diffusive, advective, chemotactic, consumption)``.

    Diffusive: ``h^2 / (2 d max D_eps(n))``; advective: ``h / max|u|``;
    chemotactic: ``h / max|rho S grad c|``; consumption: ``1 / max n``.
    """
    p = problem.params
    grid = state.n.grid
    h = grid.hmin
    n = state.n.data
    cands = [h * h / (2.0 * grid.ndim * float(np.max(d_eps(n, p))))]
    umax = state.u.max_abs()
    if umax > 0:
        cands.append(h / umax)
    if not problem.sensitivity.is_zero:
        chi = chemotactic_velocity_arrays(n, state.c.data, problem.sensitivity, problem.rho, p)
        cmax = max(float(np.abs(x).max()) for x in chi)
        if cmax > 0:
            cands.append(h / cmax)
    nmax = float(n.max())
    if nmax > 0:
        cands.append(1.0 / nmax)
    return problem.safety * min(cands)


def monotone_rates(state, problem, chi=None):
    """Sharp per-cell rates whose inverse bounds dt for ``n >= 0`` and ``c`` max principle."""
    p = problem.params
    grid = state.n.grid
    h = grid.h
    n = state.n.data
    u = state.u.comps
    nd = n.ndim
    dfaces = _diffusivity_faces(n, p)
    diff_rate = 0.0
    for a, df in enumerate(dfaces):
        idx_lo = [slice(None)] * nd
        idx_hi = [slice(None)] * nd
        idx_lo[a] = slice(None, -1)
        idx_hi[a] = slice(1, None)
        diff_rate = diff_rate + (df[tuple(idx_lo)] + df[tuple(idx_hi)]) / h[a] ** 2
    adv_out = outflow_rate(u, h)
    rate_n = diff_rate + adv_out
    if chi is not None:
        rate_n = rate_n + outflow_rate(chi, h)
    rate_c = sum(2.0 / x**2 for x in h) + n + outflow_rate(u, h, inflow=True)
    return {
        "n": float(np.max(rate_n)),
        "c": float(np.max(rate_c)),
        "diffusive": float(np.max(diff_rate)),
        "advective": float(np.max(adv_out)),
        "chemotactic": 0.0 if chi is None else float(np.max(outflow_rate(chi, h))),
    }


def n_increment_arrays(state, dt, problem):
    """Flux-form increment of ``n`` and the chemotactic face velocity used."""
    p = problem.params
    grid = state.n.grid
    h = grid.h
    n = state.n.data
    dfaces = _diffusivity_faces(n, p)
    gn = grad_arrays(n, h)
    fluxes = [-df * g for df, g in zip(dfaces, gn)]
    chi = None
    if not problem.sensitivity.is_zero:
        chem, chi = chemotactic_flux_arrays(n, state.c.data, problem.sensitivity, problem.rho, p)
        fluxes = [f + x for f, x in zip(fluxes, chem)]
    for a, v in enumerate(state.u.comps):
        if np.any(v != 0.0):
            fluxes[a] = fluxes[a] + v * upwind_face_values(n, v, a)
    return -dt * div_arrays(fluxes, h), chi


def step_n(state, dt, problem):
    """Explicit conservative update of the cell density.

    Raises :class:`StepRejected` if the result has a negative entry.
    """
    inc, _ = n_increment_arrays(state, dt, problem)
    new = state.n.data + inc
    if new.min() < 0.0:
        raise StepRejected(f"n went negative ({new.min():.3e}) at dt={dt:.3e}")
    return ScalarField(state.n.grid, new)


def step_c(state, dt, problem=None):
    """Explicit update ``c + dt (Lap c - n c - u.grad c)``.

    Raises :class:`StepRejected` if ``c`` leaves ``[0, max c]``.
    """
    grid = state.c.grid
    c = state.c.data
    n = state.n.data
    inc = div_arrays(grad_arrays(c, grid.h), grid.h) - n * c
    if any(np.any(v != 0.0) for v in state.u.comps):
        inc = inc + advective_upwind_arrays(c, state.u.comps, grid.h)
    new = c + dt * inc
    cmax = float(c.max())
    if new.min() < 0.0 or new.max() > cmax:
        raise StepRejected(f"c left [0, {cmax:.6g}]: range [{new.min():.3e}, {new.max():.6g}] at dt={dt:.3e}")
    return ScalarField(grid, new)


def choose_dt(state, problem, horizon=None):
    if problem.fixed_dt is not None:
        dt = problem.fixed_dt
    else:
        chi = None
        if not problem.sensitivity.is_zero:
            chi = chemotactic_velocity_arrays(state.n.data, state.c.data, problem.sensitivity, problem.rho, problem.params)
        rates = monotone_rates(state, problem, chi)
        dt = min(stable_dt(state, problem), problem.safety / max(rates["n"], rates["c"]))
    if horizon is not None:
        dt = min(dt, horizon - state.t)
    return dt


def check_invariants(state, problem, c_bound):
    grid = state.n.grid
    u = state.u
    div = float(np.abs(div_arrays(u.comps, grid.h)).max())
    div_scale = max(u.max_abs() / grid.hmin, 1.0)
    return {
        "n_nonnegative": bool(state.n.data.min() >= 0.0),
        "c_nonnegative": bool(state.c.data.min() >= 0.0),
        "c_bounded": bool(state.c.data.max() <= c_bound + 1e-12),
        "u_solenoidal": bool(div <= 1e3 * problem.settings.projection_tol * div_scale),
        "finite": bool(np.isfinite(state.n.data).all() and np.isfinite(state.c.data).all()),
    }


def step_coupled(state, problem, solver=None, horizon=None, dt=None):
    """One split step with dt halving on rejection.

    Returns ``(new_state, StepReport)``.  Raises :class:`BlowUpSuspected`
    after ``max_halvings`` consecutive rejections and
    :class:`InvariantError` if an accepted state breaks an invariant.
    """
    p = problem.params
    solver = solver or StokesSolver(state.n.grid, problem.settings)
    if dt is None:
        dt = choose_dt(state, problem, horizon)
    c_bound = problem.c_bound if problem.c_bound is not None else float(state.c.data.max())
    halvings = 0
    while True:
        try:
            n_new = step_n(state, dt, problem)
            c_new = step_c(state, dt, problem)
            break
        except StepRejected as exc:
            if halvings >= problem.max_halvings:
                raise BlowUpSuspected(f"step {state.step}: {halvings} halvings without acceptance ({exc})") from exc
            halvings += 1
            dt *= 0.5
            log.debug("step %d rejected, retrying with dt=%.3e", state.step, dt)
    stokes = solver.velocity_step(state.stokes, n_new, p, problem.potential, dt)
    new = State(n_new, c_new, stokes, state.t + dt, state.step + 1)

    chi = None
    if not problem.sensitivity.is_zero:
        chi = chemotactic_velocity_arrays(state.n.data, state.c.data, problem.sensitivity, problem.rho, p)
    rates = monotone_rates(state, problem, chi)
    report = StepReport(
        dt=dt,
        cfl_advective=dt * rates["advective"],
        cfl_diffusive=dt * rates["diffusive"],
        cfl_chemotactic=dt * rates["chemotactic"],
        halvings=halvings,
        yosida_iterations=solver.last_yosida.iterations,
        poisson_residual=solver.poisson.last_residual,
        n_min=float(n_new.data.min()),
        c_min=float(c_new.data.min()),
        c_max=float(c_new.data.max()),
        checks=check_invariants(new, problem, c_bound),
    )
    if not report.ok:
        failed = [k for k, v in report.checks.items() if not v]
        raise InvariantError(f"step {new.step} at t={new.t:.6g}: invariants failed: {failed}")
    return new, report


@dataclass
class RunResult:
    state: object
    series: object
    reports: list
    blowup: bool = False
    message: str = ""


def run_to_time(state0, horizon, problem, cadence=1, callbacks=(), series=None, keep_reports=False):
    """Step until ``t == horizon``, recording diagnostics every ``cadence`` steps.

    Dissipation budgets are accumulated every step by left-endpoint
    quadrature regardless of the cadence, so the cadence only changes how
    many rows the series holds.
    """
    from .diagnostics import FunctionalSeries

    if series is None:
        series = FunctionalSeries(problem.params)
    if horizon <= state0.t:
        return RunResult(state0, series, [])
    if problem.c_bound is None:
        problem = replace(problem, c_bound=float(state0.c.data.max()))
    solver = StokesSolver(state0.n.grid, problem.settings)
    state = state0
    reports = []
    k = 0
    try:
        while state.t < horizon:
            new, rep = step_coupled(state, problem, solver, horizon=horizon)
            if k % cadence == 0:
                series.record(state, rep.dt)
                for cb in callbacks:
                    cb(state, series)
            else:
                series.accumulate(state, rep.dt)
            if keep_reports:
                reports.append(rep)
            state = new
            k += 1
            # guard against dt underflow at the horizon
            if horizon - state.t <= 1e-14 * max(1.0, horizon):
                state = replace(state, t=float(horizon))
    except BlowUpSuspected as exc:
        series.record(state, 0.0)
        return RunResult(state, series, reports, blowup=True, message=str(exc))
    series.record(state, 0.0)
    for cb in callbacks:
        cb(state, series)
    return RunResult(state, series, reports)
