"""Energy functionals, dissipation budgets and inequality audits."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, OutOfRegimeError
from .grid import ScalarField
from .model_config import REGIME_THRESHOLD
from .operators import (
    centered_cell_gradient,
    div_arrays,
    face_average,
    grad_arrays,
    hessian_frobenius_array,
)
from .stokes import dirichlet_energy_arrays

SQRT_FLOOR = 1e-14
LOG_HESSIAN_FLOOR = 1e-8

FUNCTIONAL_KEYS = (
    "mass",
    "c_sup",
    "entropy",
    "sqrt_dirichlet",
    "kinetic",
    "energy",
    "power_mass",
    "c_l2sq",
)
BUDGET_KEYS = (
    "budget_n_m2_grad_n",
    "budget_grad_c_4",
    "budget_grad_u_2",
    "budget_c_log_hessian",
    "budget_n_eps_2m4_grad_n",
    "budget_grad_c_2",
)
COLUMNS = ("t",) + FUNCTIONAL_KEYS + BUDGET_KEYS


def _faces_sq(comps):
    return sum(float(np.sum(g * g)) for g in comps)


def _parts(state, p, eps):
    grid = state.n.grid
    vol = grid.cell_volume
    n, c = state.n.data, state.c.data
    sqrt_c = np.sqrt(c + SQRT_FLOOR)
    return {
        "mass": float(n.sum() * vol),
        "c_sup": float(np.abs(c).max()),
        "entropy": float(xlogy(n, n).sum() * vol),
        "sqrt_dirichlet": _faces_sq(grad_arrays(sqrt_c, grid.h)) * vol,
        "kinetic": _faces_sq(state.u.comps) * vol,
        "power_mass": float(((n + eps) ** (p.m - 1.0)).sum() * vol),
        "c_l2sq": float((c * c).sum() * vol),
    }


def _energy_from_parts(parts, m):
    if m <= 2:
        return parts["entropy"] + parts["sqrt_dirichlet"] + parts["kinetic"]
    return parts["power_mass"] + parts["c_l2sq"] + parts["kinetic"]


def energy(state, p, eps=None, strict=True):
    """Regime-dependent energy.

    ``m <= 2``: ``int n ln n + int |grad sqrt c|^2 + int |u|^2``;
    ``m > 2``: ``int (n + eps)^(m-1) + int c^2 + int |u|^2``.
    ``eps`` overrides ``p.epsilon`` (``eps=0`` shows the unregularised value).
    """
    if strict and p.m <= float(REGIME_THRESHOLD):
        raise OutOfRegimeError(f"energy functional needs m > 10/9, got {p.m}")
    eps = p.epsilon if eps is None else eps
    return _energy_from_parts(_parts(state, p, eps), p.m)


def functionals(state, p):
    parts = _parts(state, p, p.epsilon)
    parts["energy"] = _energy_from_parts(parts, p.m)
    return {k: parts[k] for k in FUNCTIONAL_KEYS}


def dissipation_rates(state, p):
    """Spatial integrands of every budget at one instant (all nonnegative)."""
    grid = state.n.grid
    h, vol = grid.h, grid.cell_volume
    n, c = state.n.data, state.c.data
    m, eps = p.m, p.epsilon
    # n^(m-2) |grad n|^2 = (4/m^2) |grad n^(m/2)|^2 stays finite where n -> 0
    pm = (4.0 / m**2) * _faces_sq(grad_arrays(n ** (m / 2.0), h)) * vol
    gc_faces = grad_arrays(c, h)
    gc_cell = centered_cell_gradient(c, h)
    gc2 = sum(g * g for g in gc_cell)
    gn = grad_arrays(n, h)
    weighted = 0.0
    for a, g in enumerate(gn):
        weighted += float(np.sum((face_average(n, a) + eps) ** (2.0 * m - 4.0) * g * g))
    mask = c > LOG_HESSIAN_FLOOR
    if mask.any():
        hl = hessian_frobenius_array(np.log(np.maximum(c, LOG_HESSIAN_FLOOR)), h)
        clh = float(np.sum(np.where(mask, c * hl * hl, 0.0))) * vol
    else:
        clh = 0.0
    return {
        "budget_n_m2_grad_n": pm,
        "budget_grad_c_4": float(np.sum(gc2 * gc2)) * vol,
        "budget_grad_u_2": max(dirichlet_energy_arrays(state.u.comps, grid), 0.0),
        "budget_c_log_hessian": clh,
        "budget_n_eps_2m4_grad_n": weighted * vol,
        "budget_grad_c_2": _faces_sq(gc_faces) * vol,
    }


class FunctionalSeries:
    """Time series of functionals plus left-endpoint dissipation budgets."""

    def __init__(self, params):
        self.params = params
        self.times = []
        self.rows = {k: [] for k in FUNCTIONAL_KEYS + BUDGET_KEYS}
        self.running = {k: 0.0 for k in BUDGET_KEYS}

    def __len__(self):
        return len(self.times)

    def accumulate(self, state, dt):
        if dt <= 0:
            return
        rates = dissipation_rates(state, self.params)
        for k, r in rates.items():
            new = self.running[k] + dt * r
            if not new >= self.running[k]:
                raise AssertionError(f"budget {k} decreased: {self.running[k]} -> {new}")
            self.running[k] = new

    def record(self, state, dt=0.0):
        """Append functionals at ``state.t`` then add ``dt * rate`` to the budgets."""
        t = float(state.t)
        if self.times and not t > self.times[-1]:
            raise ValueError(f"record times must increase strictly: {t} after {self.times[-1]}")
        self.times.append(t)
        for k, v in functionals(state, self.params).items():
            self.rows[k].append(v)
        for k in BUDGET_KEYS:
            self.rows[k].append(self.running[k])
        self.accumulate(state, dt)
        return self

    def column(self, key):
        if key == "t":
            return np.asarray(self.times)
        return np.asarray(self.rows[key])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(self.rows[k][i])) for k in COLUMNS[1:]])


def record(state, series, dt):
    """Append ``state`` to ``series`` and accumulate ``dt`` worth of dissipation."""
    return series.record(state, dt)


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(x) for x in row] for row in r]
    return header, np.array(data)


# audits


@dataclass
class AuditCheck:
    name: str
    bound_form: str
    constants: dict
    max_violation: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_violation <= self.tolerance)


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)

    def add(self, *args, **kw):
        chk = AuditCheck(*args, **kw)
        self.checks.append(chk)
        return chk

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def linear_majorant(t, b):
    """Least-squares line through ``(t, b)`` and its worst positive residual."""
    t = np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(t) < 2:
        return 0.0, float(b[0]) if len(b) else 0.0, 0.0
    slope, icept = np.polyfit(t, b, 1)
    resid = b - (icept + slope * t)
    return float(slope), float(icept), float(max(resid.max(), 0.0))


def audit_bounds(series, energy_headroom=1.5, early_fraction=0.1, budget_slack=0.05,
                 mass_tol=1e-12, c_tol=1e-12):
    """Audit the boundedness claims on a recorded trajectory.

    (a) ``sup E <= E(0) + headroom * C_fit`` with ``C_fit`` the largest rise of
    ``E`` over the first ``early_fraction`` of the records; (b) each budget
    has a least-squares line ``a + bT`` with worst positive residual within
    ``budget_slack`` of its range; (c) mass constant; (d) ``sup c``
    nonincreasing.
    """
    if len(series) == 0:
        raise ValueError("audit needs a nonempty series")
    rep = AuditReport()
    t = series.column("t")
    e = series.column("energy")
    k = max(2, int(math.ceil(early_fraction * len(e))))
    e0 = float(e[0])
    c_fit = max(float(e[:k].max()) - e0, 0.0)
    bound = e0 + energy_headroom * c_fit
    rep.add("energy_bounded", "E(0) + C", {"E0": e0, "C_fit": c_fit, "sup_E": float(e.max()), "bound": bound},
            float(e.max()) - bound, 1e-12 * max(1.0, abs(e0)))
    for key in BUDGET_KEYS:
        b = series.column(key)
        slope, icept, worst = linear_majorant(t, b)
        span = float(b.max() - b.min())
        rep.add(f"{key}_linear", "a + b T", {"a": icept, "b": slope, "range": span, "worst_residual": worst},
                worst - budget_slack * span, 1e-13 * max(1.0, float(np.abs(b).max())))
    mass = series.column("mass")
    m0 = float(mass[0])
    drift = float(np.abs(mass - m0).max()) / (abs(m0) if m0 != 0 else 1.0)
    rep.add("mass_conserved", "const", {"mass0": m0}, drift, mass_tol)
    cs = series.column("c_sup")
    rise = float(np.diff(cs).max()) if len(cs) > 1 else 0.0
    rep.add("c_sup_nonincreasing", "nonincreasing", {"c_sup0": float(cs[0])}, max(rise, 0.0), c_tol)
    return rep


def audit_power_energy(series, factor=1.5):
    """``sup_t E(t) <= factor * E(0)`` for the ``m > 2`` functional."""
    e = series.column("energy")
    rep = AuditReport()
    rep.add("power_energy_ratio", f"{factor} * E(0)", {"E0": float(e[0]), "sup_E": float(e.max())},
            float(e.max()) - factor * float(e[0]), 0.0)
    return rep


def interior_mask(grid, ring=2):
    mask = np.ones(grid.dims, dtype=bool)
    for a in range(grid.ndim):
        idx = [slice(None)] * grid.ndim
        idx[a] = slice(0, ring)
        mask[tuple(idx)] = False
        idx[a] = slice(-ring, None)
        mask[tuple(idx)] = False
    return mask


def gn_terms(phi, q, lam):
    """``(||grad phi||_lam, |||grad phi|^(q-1) D^2 phi||_2, ||phi||_inf)`` on the interior."""
    grid = phi.grid
    mask = interior_mask(grid)
    vol = grid.cell_volume
    g = np.sqrt(sum(x * x for x in centered_cell_gradient(phi.data, grid.h)))
    hess = hessian_frobenius_array(phi.data, grid.h)
    lhs = float(np.sum(g[mask] ** lam) * vol) ** (1.0 / lam)
    weighted = float(np.sum((g[mask] ** (q - 1.0) * hess[mask]) ** 2) * vol) ** 0.5
    sup = float(np.abs(phi.data).max())
    return lhs, weighted, sup


def gn_constant(phi, q, lam):
    a = 2.0 * (lam - 3.0) / ((2.0 * q - 1.0) * lam)
    b = (6.0 * q - lam) / ((2.0 * q - 1.0) * lam)
    lhs, weighted, sup = gn_terms(phi, q, lam)
    if lhs == 0.0:
        return 0.0
    denom = weighted**a * sup**b + sup
    return lhs / denom


def _check_gn_exponents(q, lam):
    if q < 1:
        raise DomainError(f"need q >= 1, got {q}")
    if not 2 * q + 2 <= lam <= 4 * q + 1:
        raise DomainError(f"lambda={lam} outside admissible [{2 * q + 2}, {4 * q + 1}]")


def gn_audit(corpus, q, lam, refined=None, stability_factor=2.0):
    """Smallest constant making the interpolation inequality hold per field.

    With a ``refined`` corpus (same fields on a finer grid) the check passes
    when the two corpus maxima agree within ``stability_factor``.
    """
    _check_gn_exponents(q, lam)
    for phi in list(corpus) + list(refined or []):
        if phi.data.min() <= 0:
            raise DomainError("interpolation audit needs strictly positive fields")
    rep = AuditReport()
    consts = [gn_constant(phi, q, lam) for phi in corpus]
    cmax = max(consts) if consts else 0.0
    info = {"q": q, "lambda": lam, "per_field": consts, "corpus_max": cmax}
    if refined is None:
        rep.add("gn_constant", "C", info, 0.0 if math.isfinite(cmax) else math.inf, 0.0)
        return rep
    rconsts = [gn_constant(phi, q, lam) for phi in refined]
    rmax = max(rconsts) if rconsts else 0.0
    info.update(refined_per_field=rconsts, refined_max=rmax)
    if cmax == 0.0 and rmax == 0.0:
        ratio = 1.0
    elif min(cmax, rmax) == 0.0:
        ratio = math.inf
    else:
        ratio = max(cmax, rmax) / min(cmax, rmax)
    info["ratio"] = ratio
    rep.add("gn_constant_stable", f"ratio <= {stability_factor}", info, ratio - stability_factor, 0.0)
    return rep


def pointwise_log_identity_audit(w, slack_factor=10.0):
    """Compare ``||Lap sqrt w||`` with ``1/2 ||sqrt w Lap ln w|| + 1/4 ||w^-3/2 |grad w|^2||``.

    Also reports the value of ``-2 int |Lap w|^2 / w + int |grad w|^2 Lap w / w^2``
    and its ratio to ``int w``.
    """
    if w.data.min() <= 0:
        raise DomainError("log identity audit needs a strictly positive field")
    grid = w.grid
    h = grid.h
    mask = interior_mask(grid)
    vol = grid.cell_volume
    wd = w.data

    def lap(f):
        return div_arrays(grad_arrays(f, h), h)

    def l2(f):
        return float(np.sum(f[mask] ** 2) * vol) ** 0.5

    gw2 = sum(g * g for g in centered_cell_gradient(wd, h))
    lhs = l2(lap(np.sqrt(wd)))
    t_log = 0.5 * l2(np.sqrt(wd) * lap(np.log(wd)))
    t_grad = 0.25 * l2(wd**-1.5 * gw2)
    slack = slack_factor * max(h)
    lw = lap(wd)
    form = float(np.sum((-2.0 * lw**2 / wd + gw2 * lw / wd**2)[mask]) * vol)
    mass = float(np.sum(wd[mask]) * vol)
    rep = AuditReport()
    rep.add("log_identity", "LHS <= 1/2 A + 1/4 B + 10h",
            {"lhs": lhs, "log_term": t_log, "grad_term": t_grad, "slack": slack,
             "dissipation_form": form, "integral_w": mass, "form_ratio": form / mass},
            lhs - (t_log + t_grad), slack)
    return rep
