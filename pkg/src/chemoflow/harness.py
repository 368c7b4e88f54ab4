"""Run configuration, seeded initial data, single runs and epsilon sweeps."""
from __future__ import annotations

import copy
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .diagnostics import audit_bounds, audit_power_energy
from .errors import (
    ChemoflowError,
    ConfigError,
    DomainError,
    InvariantError,
    ParameterError,
    SolverError,
)
from .grid import Grid, ScalarField, VectorField, face_norm2, norm_lp
from .model_config import InitialData, ModelParams, PotentialSpec, SensitivitySpec, validate_params
from .stokes import SolverSettings
from .timestepper import Problem, State, run_to_time

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.random.PCG64"
OUTPUT_ROOT_ENV = "CHEMOFLOW_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_BLOWUP = 4
EXIT_IO = 5
EXIT_INVARIANT = 6
EXIT_VERIFY_FAILED = 7

DEFAULTS = {
    "m": 1.5,
    "kappa": 1.0,
    "epsilon": 0.1,
    "dim": 2,
    "c_d": 1.0,
    "c_d_upper": None,
    "sensitivity": {"family": "scalar", "s0": [1.0], "theta": 0.0, "axis": None},
    "grad_phi": None,
    "grid": {"dims": None, "extents": None},
    "time": {"horizon": 0.1, "safety": 0.9, "max_halvings": 10, "dt": None},
    "solvers": {"projection_tol": 1e-10, "yosida_tol": 1e-9, "yosida_max_iter": 200},
    "diagnostics": {"cadence": 1},
    "initial": {
        "n_mean": 1.0,
        "n_amplitude": 0.5,
        "c_mean": 0.5,
        "c_amplitude": 0.4,
        "u_amplitude": 0.0,
        "modes": 3,
    },
    "output": {"root": "chemoflow_out", "csv": "series.csv", "audit": "audit.json", "checkpoint": "final.ckpt"},
    "seed": 0,
    "override_regime": False,
    "workers": 1,
}


def _merge(defaults, given, where):
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where or 'config'}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(defaults[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where + '.' if where else ''}{k} must be an object")
            out[k] = _merge(defaults[k], v, f"{where + '.' if where else ''}{k}")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    params: ModelParams
    sensitivity: SensitivitySpec
    potential: PotentialSpec
    grid: Grid
    settings: SolverSettings
    horizon: float
    safety: float
    max_halvings: int
    fixed_dt: float | None
    cadence: int
    initial: dict
    output: dict
    seed: int
    override_regime: bool
    workers: int
    raw: dict = field(default_factory=dict)
    root_override: str | None = None

    def problem(self):
        return Problem(
            self.params, self.sensitivity, self.potential, self.grid, self.settings,
            safety=self.safety, max_halvings=self.max_halvings, fixed_dt=self.fixed_dt,
        )

    def output_dir(self):
        """Flag beats environment beats config."""
        root = self.root_override or os.environ.get(OUTPUT_ROOT_ENV) or self.output["root"]
        return Path(root)


def parse_config(raw):
    """Validate a config mapping; unknown keys anywhere are an error."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULTS, raw, "")
    dim = int(cfg["dim"])
    try:
        params = ModelParams(
            m=cfg["m"], kappa=cfg["kappa"], c_d_lower=cfg["c_d"], c_d_upper=cfg["c_d_upper"],
            epsilon=cfg["epsilon"], dim=dim,
        )
        s = cfg["sensitivity"]
        sens = SensitivitySpec(
            family=s["family"], s0_coeffs=tuple(s["s0"]), theta=s["theta"],
            axis=tuple(s["axis"]) if s["axis"] is not None else None, dim=dim,
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    gphi = cfg["grad_phi"] if cfg["grad_phi"] is not None else [0.0] * dim
    g = cfg["grid"]
    dims = g["dims"] or [32] * dim
    extents = g["extents"] or [1.0] * len(dims)
    grid = Grid(tuple(dims), tuple(extents))
    settings = SolverSettings(**cfg["solvers"])
    t = cfg["time"]
    cadence = int(cfg["diagnostics"]["cadence"])
    if cadence < 1:
        raise ConfigError("diagnostics.cadence must be >= 1")
    return RunConfig(
        params=params, sensitivity=sens, potential=PotentialSpec(gphi), grid=grid, settings=settings,
        horizon=float(t["horizon"]), safety=float(t["safety"]), max_halvings=int(t["max_halvings"]),
        fixed_dt=None if t["dt"] is None else float(t["dt"]), cadence=cadence, initial=cfg["initial"],
        output=cfg["output"], seed=int(cfg["seed"]), override_regime=bool(cfg["override_regime"]),
        workers=int(cfg["workers"]), raw=cfg,
    )


def load_config(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(raw)


# seeded initial data


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def smooth_neumann_mode_sum(grid, rng, modes):
    """Random cosine series (zero-flux compatible), scaled to max |value| = 1."""
    coords = grid.cell_coords()
    out = np.zeros(grid.dims)
    for k in np.ndindex(*(modes + 1,) * grid.ndim):
        if not any(k):
            continue
        amp = rng.standard_normal() / (1.0 + sum(x * x for x in k))
        term = np.ones(grid.dims)
        for a, ka in enumerate(k):
            term = term * np.cos(np.pi * ka * coords[a] / grid.extents[a])
        out += amp * term
    peak = np.abs(out).max()
    return out / peak if peak > 0 else out


def _potential(grid, rng, modes, node_axes):
    """Random sine series times a ``sin^2`` envelope, sampled with nodes on ``node_axes``."""
    axes = [grid.faces_1d(b) if b in node_axes else grid.centers_1d(b) for b in range(grid.ndim)]
    xs = np.meshgrid(*axes, indexing="ij")
    envelope = np.ones(xs[0].shape)
    for b in range(grid.ndim):
        envelope = envelope * np.sin(np.pi * xs[b] / grid.extents[b]) ** 2
    out = np.zeros(xs[0].shape)
    for k in np.ndindex(*(modes,) * grid.ndim):
        amp = rng.standard_normal() / sum((x + 1) ** 2 for x in k)
        term = np.ones(out.shape)
        for b, kb in enumerate(k):
            term = term * np.cos(np.pi * kb * xs[b] / grid.extents[b])
        out += amp * term
    return envelope * out


def smooth_solenoidal(grid, rng, modes):
    """Discrete curl of a smooth potential that vanishes to second order at the walls.

    The curl of a node/edge potential is divergence-free on the staggered grid
    up to rounding, and no tangential boundary layer is created.
    """
    h = grid.h
    if grid.ndim == 1:
        return VectorField.zeros(grid)
    if grid.ndim == 2:
        psi = _potential(grid, rng, modes, (0, 1))
        comps = [np.diff(psi, axis=1) / h[1], -np.diff(psi, axis=0) / h[0]]
    else:
        pot = [_potential(grid, rng, modes, tuple(b for b in range(3) if b != a)) for a in range(3)]
        comps = []
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            comps.append(np.diff(pot[c], axis=b) / h[b] - np.diff(pot[b], axis=c) / h[c])
    w = VectorField(grid, comps)
    peak = w.max_abs()
    return w * (1.0 / peak) if peak > 0 else w


def make_initial_data(grid, spec, seed):
    """Positive smooth ``n0``, ``c0`` and solenoidal ``u0`` from one seeded stream."""
    rng = make_rng(seed)
    modes = int(spec["modes"])
    psi_n = smooth_neumann_mode_sum(grid, rng, modes)
    psi_c = smooth_neumann_mode_sum(grid, rng, modes)
    n0 = spec["n_mean"] * (1.0 + spec["n_amplitude"] * psi_n)
    c0 = spec["c_mean"] * (1.0 + spec["c_amplitude"] * psi_c)
    if spec["u_amplitude"]:
        u0 = smooth_solenoidal(grid, rng, modes) * float(spec["u_amplitude"])
    else:
        u0 = VectorField.zeros(grid)
    return InitialData(ScalarField(grid, np.maximum(n0, 0.0)), ScalarField(grid, np.maximum(c0, 0.0)), u0)


# single runs


@dataclass
class RunOutcome:
    exit_code: int
    message: str = ""
    result: object = None
    audit: object = None
    validation: object = None
    paths: dict = field(default_factory=dict)


def _provenance(cfg):
    return {
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "cutoff_width": f"epsilon * min(extents) = {cfg.params.epsilon * min(cfg.grid.extents)!r}",
        "config": cfg.raw,
    }


def simulate(cfg, init=None, params=None):
    """Validate and integrate one scenario; returns ``(RunResult, ValidationReport)``."""
    init = init or make_initial_data(cfg.grid, cfg.initial, cfg.seed)
    problem = cfg.problem()
    if params is not None:
        problem = Problem(params, problem.sensitivity, problem.potential, problem.grid, problem.settings,
                          problem.safety, problem.max_halvings, problem.fixed_dt)
    report = validate_params(problem.params, cfg.sensitivity, cfg.potential, init, override=cfg.override_regime)
    if not report.may_start:
        return None, report
    result = run_to_time(State.initial(init), cfg.horizon, problem, cadence=cfg.cadence)
    return result, report


def run(cfg):
    """Run one configuration and write series CSV, audit JSON and final checkpoint."""
    outdir = cfg.output_dir()
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return RunOutcome(EXIT_IO, f"cannot create output directory {outdir}: {exc}")
    try:
        result, validation = simulate(cfg)
    except (DomainError, ParameterError) as exc:
        return RunOutcome(EXIT_VALIDATION, str(exc))
    except SolverError as exc:
        return RunOutcome(EXIT_SOLVER, f"solver failure: {exc}")
    except InvariantError as exc:
        return RunOutcome(EXIT_INVARIANT, f"invariant failure: {exc}")
    if result is None:
        failed = ", ".join(f"{c.name} ({c.detail})" for c in validation.failures)
        return RunOutcome(EXIT_VALIDATION, f"validation failed: {failed}", validation=validation)

    audit = audit_bounds(result.series)
    if cfg.params.m > 2:
        audit.checks.extend(audit_power_energy(result.series).checks)
    paths = {k: outdir / cfg.output[k] for k in ("csv", "audit", "checkpoint")}
    try:
        result.series.write_csv(paths["csv"])
        doc = {
            "audit": audit.to_dict(),
            "validation": validation.to_dict(),
            "blowup": result.blowup,
            "final_time": result.state.t,
            "steps": result.state.step,
            "provenance": _provenance(cfg),
        }
        with open(paths["audit"], "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        save_checkpoint(result.state, paths["checkpoint"], meta={"rng": RNG_ALGORITHM, "seed": cfg.seed})
    except OSError as exc:
        return RunOutcome(EXIT_IO, f"I/O error: {exc}", result, audit, validation)
    if result.blowup:
        return RunOutcome(EXIT_BLOWUP, result.message, result, audit, validation, paths)
    return RunOutcome(EXIT_OK, "ok", result, audit, validation, paths)


# epsilon sweeps


@dataclass
class SweepResult:
    ladder: list
    finals: list
    n_l1: list
    c_l2: list
    u_l2: list
    failures: dict = field(default_factory=dict)
    slack: float = 0.2

    @property
    def trend_ok(self):
        """Consecutive n differences nonincreasing within the slack."""
        d = self.n_l1
        return all(d[i + 1] <= (1.0 + self.slack) * d[i] for i in range(len(d) - 1))

    @property
    def passed(self):
        return not self.failures and self.trend_ok

    def to_dict(self):
        return {
            "ladder": self.ladder,
            "n_l1": self.n_l1,
            "c_l2": self.c_l2,
            "u_l2": self.u_l2,
            "failures": self.failures,
            "trend_ok": self.trend_ok,
        }


def _sweep_member(args):
    cfg, init, eps = args
    params = cfg.params.with_epsilon(eps)
    try:
        result, validation = simulate(cfg, init=init, params=params)
    except ChemoflowError as exc:
        return eps, None, f"{type(exc).__name__}: {exc}"
    if result is None:
        return eps, None, "validation failed"
    if result.blowup:
        return eps, result.state, f"blow-up suspected: {result.message}"
    return eps, result.state, None


def sweep_epsilon(cfg, ladder, workers=None, slack=0.2):
    """Run one scenario per epsilon from bit-identical initial data."""
    ladder = [float(e) for e in ladder]
    if not ladder:
        raise DomainError("epsilon ladder is empty")
    if any(not 0 < e <= 1 for e in ladder):
        raise DomainError(f"ladder entries must lie in (0, 1]: {ladder}")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError(f"ladder must be strictly decreasing: {ladder}")
    init = make_initial_data(cfg.grid, cfg.initial, cfg.seed)
    jobs = [(cfg, init, e) for e in ladder]
    workers = cfg.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(_sweep_member, jobs))
    else:
        members = [_sweep_member(j) for j in jobs]
    finals = [st for _, st, _ in members]
    failures = {e: msg for e, _, msg in members if msg}
    n_l1, c_l2, u_l2 = [], [], []
    for a, b in zip(finals, finals[1:]):
        if a is None or b is None:
            n_l1.append(float("nan"))
            c_l2.append(float("nan"))
            u_l2.append(float("nan"))
            continue
        n_l1.append(norm_lp(a.n.with_data(a.n.data - b.n.data), 1))
        c_l2.append(norm_lp(a.c.with_data(a.c.data - b.c.data), 2))
        u_l2.append(face_norm2(a.u - b.u))
    return SweepResult(ladder, finals, n_l1, c_l2, u_l2, failures, slack)
