"""The fourteen acceptance criteria as runnable checks.

Each ``criterion_k`` method returns a :class:`CriterionResult`; expensive
trajectories are shared between criteria through cached properties.  The
scenario choices (box sizes, initial data) are documented next to each run.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .diagnostics import audit_bounds, audit_power_energy, gn_audit
from .grid import Grid, ScalarField, VectorField, cell_inner, face_inner, face_norm2
from .harness import make_initial_data, make_rng, parse_config, smooth_neumann_mode_sum, sweep_epsilon
from .model_config import ModelParams, PotentialSpec, SensitivitySpec, theorem_exponents
from .operators import div_arrays, divergence, gradient
from .stokes import SolverSettings, StokesSolver, StokesState
from .timestepper import Problem, State, run_to_time

ROTATIONAL = {"family": "rotational", "s0": [1.0], "theta": 0.5}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} criterion {self.number:2d} ({self.title}): {self.detail} [{self.elapsed:.1f}s]"


@dataclass
class TimedRun:
    result: object
    elapsed: float


def _timed_run(cfg, keep_reports=True):
    init = make_initial_data(cfg.grid, cfg.initial, cfg.seed)
    t0 = time.perf_counter()
    res = run_to_time(State.initial(init), cfg.horizon, cfg.problem(), cadence=cfg.cadence, keep_reports=keep_reports)
    return TimedRun(res, time.perf_counter() - t0)


def barenblatt(t, x, m=2.0, C=1.0):
    """Exact 1D self-similar porous-medium solution of ``n_t = (n^m)_xx``."""
    alpha = 1.0 / (m + 1.0)
    k = alpha * (m - 1.0) / (2.0 * m)
    xi = x * t ** (-alpha)
    return t ** (-alpha) * np.maximum(C - k * xi * xi, 0.0) ** (1.0 / (m - 1.0))


class AcceptanceSuite:
    def __init__(self, seed=0):
        self.seed = seed

    # shared trajectories

    @cached_property
    def config_2d(self):
        # 4x4 box: same physics as the unit box at 1/16 the step count
        return parse_config({
            "m": 1.5, "epsilon": 0.1, "sensitivity": ROTATIONAL, "grad_phi": [0.0, -1.0],
            "grid": {"dims": [64, 64], "extents": [4.0, 4.0]},
            "initial": {"u_amplitude": 0.1}, "time": {"horizon": 1.0},
            "diagnostics": {"cadence": 10}, "seed": self.seed,
        })

    @cached_property
    def run_2d(self):
        return _timed_run(self.config_2d)

    def energy_config(self, m):
        # dilute, slowly relaxing data so the dissipation rates stay comparable over [0, 1]
        return parse_config({
            "m": m, "epsilon": 0.1, "sensitivity": ROTATIONAL, "grad_phi": [0.0, -1.0],
            "grid": {"dims": [64, 64], "extents": [12.0, 12.0]},
            "initial": {"u_amplitude": 0.1, "n_mean": 0.05, "c_mean": 1.0, "modes": 1},
            "time": {"horizon": 1.0}, "diagnostics": {"cadence": 10}, "seed": self.seed,
        })

    @cached_property
    def run_m15(self):
        return _timed_run(self.energy_config(1.5))

    @cached_property
    def run_m25(self):
        return _timed_run(self.energy_config(2.5))

    @cached_property
    def run_3d(self):
        cfg = parse_config({
            "m": 1.5, "dim": 3, "epsilon": 0.1,
            "sensitivity": dict(ROTATIONAL, axis=[0.0, 0.0, 1.0]), "grad_phi": [0.0, 0.0, -1.0],
            "grid": {"dims": [16, 16, 16]}, "initial": {"u_amplitude": 0.1},
            "time": {"horizon": 0.1}, "seed": self.seed,
        })
        return _timed_run(cfg)

    @cached_property
    def run_uniform(self):
        grid = Grid.unit(8)
        p = ModelParams(m=1.5, epsilon=0.1)
        problem = Problem(p, SensitivitySpec("scalar", (1.0,)), PotentialSpec([0.0, 0.0]), grid, fixed_dt=1e-3)
        st = State(ScalarField.constant(grid, 1.0), ScalarField.constant(grid, 1.0),
                   StokesState(VectorField.zeros(grid), ScalarField.zeros(grid)))
        t0 = time.perf_counter()
        res = run_to_time(st, 1.0, problem, cadence=100, keep_reports=True)
        return TimedRun(res, time.perf_counter() - t0)

    @cached_property
    def run_barenblatt(self):
        out = []
        t0 = time.perf_counter()
        for n_cells in (128, 256, 512):
            grid = Grid((n_cells,), (8.0,))
            x = grid.centers_1d(0) - 4.0
            # C_D = m turns D(n) n_x into (n^m)_x; epsilon is negligible
            p = ModelParams(m=2.0, kappa=0.0, c_d_lower=2.0, epsilon=1e-10, dim=1)
            problem = Problem(p, SensitivitySpec("scalar", (0.0,), dim=1), PotentialSpec([0.0]), grid)
            st = State(ScalarField(grid, barenblatt(0.1, x)), ScalarField.zeros(grid),
                       StokesState(VectorField.zeros(grid), ScalarField.zeros(grid)), 0.1)
            res = run_to_time(st, 0.5, problem, cadence=10**9, keep_reports=True)
            err = float(np.sum(np.abs(res.state.n.data - barenblatt(0.5, x))) * grid.cell_volume)
            out.append((grid.h[0], err, res))
        return TimedRun(out, time.perf_counter() - t0)

    # criteria

    def criterion_1(self):
        r = self.run_2d
        mass = r.result.series.column("mass")
        drift = float(np.abs(mass - mass[0]).max() / mass[0])
        ok = drift <= 1e-12 and r.elapsed < 60.0 and not r.result.blowup
        return CriterionResult(1, "mass conservation", ok,
                               f"max relative drift {drift:.2e} over {len(mass)} records, run {r.elapsed:.1f}s",
                               r.elapsed)

    def criterion_2(self):
        series = self.run_2d.result.series
        cs = series.column("c_sup")
        cmins = [rep.c_min for rep in self.run_2d.result.reports]
        over = float(cs.max() - cs[0])
        cmin = min(cmins) if cmins else float("nan")
        ok = over <= 1e-12 and cmin >= 0.0
        return CriterionResult(2, "maximum principle", ok, f"max c - c0_sup = {over:.2e}, min c = {cmin:.3e}")

    def criterion_3(self):
        runs = {
            "2d": self.run_2d.result, "uniform": self.run_uniform.result, "m1.5": self.run_m15.result,
            "m2.5": self.run_m25.result, "3d": self.run_3d.result,
        }
        for h, _, res in self.run_barenblatt.result:
            runs[f"barenblatt h={h:.4g}"] = res
        worst = {k: min(rep.n_min for rep in r.reports) for k, r in runs.items() if r.reports}
        steps = sum(len(r.reports) for r in runs.values())
        lo = min(worst.values())
        return CriterionResult(3, "nonnegativity of n", lo >= 0.0, f"min n = {lo:.3e} over {steps} accepted steps")

    def criterion_4(self):
        r = self.run_uniform
        c = r.result.state.c.data
        err = float(np.abs(c - math.exp(-1.0)).max())
        ok = err <= 1e-3 and abs(r.result.state.t - 1.0) < 1e-12
        return CriterionResult(4, "uniform-state ODE oracle", ok, f"|c(1) - 1/e|_inf = {err:.3e}", r.elapsed)

    def criterion_5(self):
        r = self.run_barenblatt
        hs = np.array([h for h, _, _ in r.result])
        errs = np.array([e for _, e, _ in r.result])
        order = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        ok = order >= 0.8 and r.elapsed < 120.0
        errs_s = ", ".join(f"{e:.2e}" for e in errs)
        return CriterionResult(5, "Barenblatt convergence", ok, f"L1 errors [{errs_s}], order {order:.2f}", r.elapsed)

    def criterion_6(self):
        r = self.run_m15
        audit = audit_bounds(r.result.series)
        bad = [c.name for c in audit.checks if not c.passed]
        detail = "all audit checks pass" if not bad else f"failed: {bad}"
        return CriterionResult(6, "energy boundedness m=1.5", audit.passed and not r.result.blowup, detail, r.elapsed)

    def criterion_7(self):
        r = self.run_m25
        audit = audit_bounds(r.result.series)
        power = audit_power_energy(r.result.series)
        bad = [c.name for c in audit.checks + power.checks if not c.passed]
        ratio = power.checks[0].constants["sup_E"] / power.checks[0].constants["E0"]
        ok = audit.passed and power.passed and not r.result.blowup
        return CriterionResult(7, "power-mass boundedness m=2.5", ok,
                               f"sup E / E0 = {ratio:.4f}" + (f", failed: {bad}" if bad else ""), r.elapsed)

    def criterion_8(self):
        grid = Grid.unit(32)
        solver = StokesSolver(grid)
        rng = make_rng(self.seed + 8)
        worst_ratio, monotone = 0.0, True
        for _ in range(10):
            w, _ = solver.project(VectorField(grid, [rng.standard_normal(grid.face_shape(a)) for a in range(2)]))
            wn = face_norm2(w)
            diffs = []
            for eps in (0.5, 0.1, 0.01):
                y = solver.yosida_apply(w, eps)
                worst_ratio = max(worst_ratio, face_norm2(y) / wn)
                diffs.append(face_norm2(y - w))
            monotone &= diffs[0] > diffs[1] > diffs[2]
        ok = worst_ratio <= 1.0 + 1e-8 and monotone
        return CriterionResult(8, "Yosida contraction", ok,
                               f"max |Yw|/|w| = {worst_ratio:.6f}, |Yw - w| decreasing with eps: {monotone}")

    def criterion_9(self):
        grid = Grid((32, 24), (1.0, 0.75))
        settings = SolverSettings()
        solver = StokesSolver(grid, settings)
        rng = make_rng(self.seed + 9)
        div_r = idem_r = grad_r = 0.0
        for _ in range(10):
            v = VectorField(grid, [rng.standard_normal(grid.face_shape(a)) for a in range(2)])
            vn = face_norm2(v)
            w, _ = solver.project(v)
            div_r = max(div_r, float(np.abs(div_arrays(w.comps, grid.h)).max()) / vn)
            ww, _ = solver.project(w)
            idem_r = max(idem_r, face_norm2(ww - w) / vn)
            g = gradient(ScalarField(grid, rng.standard_normal(grid.dims)))
            pg, _ = solver.project(g)
            grad_r = max(grad_r, face_norm2(pg) / face_norm2(g))
        tol = settings.projection_tol
        ok = div_r <= 1e-9 and idem_r <= 10 * tol and grad_r <= 1e-8
        return CriterionResult(9, "projection properties", ok,
                               f"div {div_r:.1e}, idempotence {idem_r:.1e}, gradient residue {grad_r:.1e}")

    def criterion_10(self):
        rng = make_rng(self.seed + 10)
        worst = 0.0
        for grid in (Grid((16, 16), (1.0, 2.0)), Grid.unit(32), Grid((16, 16, 16), (1.0, 0.5, 2.0))):
            for _ in range(5):
                f = ScalarField(grid, rng.standard_normal(grid.dims))
                v = VectorField(grid, [rng.standard_normal(grid.face_shape(a)) for a in range(grid.ndim)])
                lhs = cell_inner(f, divergence(v))
                rhs = -face_inner(gradient(f), v)
                scale = abs(lhs) + abs(rhs)
                worst = max(worst, abs(lhs - rhs) / scale)
        return CriterionResult(10, "summation by parts", worst <= 1e-12, f"max relative defect {worst:.2e}")

    def gn_corpus(self, n_cells, size=20):
        rng = make_rng(self.seed + 11)
        grid = Grid.unit(n_cells)
        return [ScalarField(grid, 1.5 + smooth_neumann_mode_sum(grid, rng, 4)) for _ in range(size)]

    def criterion_11(self):
        t0 = time.perf_counter()
        rep = gn_audit(self.gn_corpus(64), 1, 4, refined=self.gn_corpus(128))
        chk = rep.checks[0]
        k = chk.constants
        return CriterionResult(11, "interpolation auditor stability", chk.passed,
                               f"corpus max C {k['corpus_max']:.4f} -> {k['refined_max']:.4f} (ratio {k['ratio']:.3f})",
                               time.perf_counter() - t0)

    def criterion_12(self):
        cfg = parse_config({
            "m": 1.5, "sensitivity": ROTATIONAL, "grad_phi": [0.0, -1.0],
            "grid": {"dims": [32, 32], "extents": [2.0, 2.0]}, "initial": {"u_amplitude": 0.1},
            "time": {"horizon": 0.5}, "diagnostics": {"cadence": 50}, "seed": self.seed,
        })
        t0 = time.perf_counter()
        res = sweep_epsilon(cfg, [0.4, 0.2, 0.1, 0.05])
        d = ", ".join(f"{x:.3e}" for x in res.n_l1)
        return CriterionResult(12, "epsilon-sweep Cauchy trend", res.passed, f"L1 differences [{d}]",
                               time.perf_counter() - t0)

    def criterion_13(self):
        a = theorem_exponents(2).as_tuple()
        b = theorem_exponents(3).as_tuple()
        F = Fraction
        ok = a == (F(8, 3), F(2), F(8, 5), F(20, 11)) and b == (F(16, 3), None, F(16, 11), F(5, 4))
        fmt = lambda t: "{" + ", ".join("-" if x is None else str(x) for x in t) + "}"
        return CriterionResult(13, "exponent table", ok, f"m=2 {fmt(a)}, m=3 {fmt(b)}")

    def criterion_14(self):
        r = self.run_3d
        res = r.result
        mass = res.series.column("mass")
        drift = float(np.abs(mass - mass[0]).max() / mass[0])
        cs = res.series.column("c_sup")
        over = float(cs.max() - cs[0])
        cmin = min(rep.c_min for rep in res.reports)
        nmin = min(rep.n_min for rep in res.reports)
        ok = (not res.blowup and drift <= 1e-12 and over <= 1e-12 and cmin >= 0.0 and nmin >= 0.0
              and r.elapsed < 300.0)
        return CriterionResult(14, "small 3D smoke", ok,
                               f"{res.state.step} steps, mass drift {drift:.1e}, c overshoot {over:.1e}, "
                               f"min n {nmin:.2e}", r.elapsed)

    def run(self, numbers=None, echo=print):
        numbers = numbers or range(1, 15)
        out = []
        for k in numbers:
            res = getattr(self, f"criterion_{k}")()
            if echo is not None:
                echo(res.line())
            out.append(res)
        return out
