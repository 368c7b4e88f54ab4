"""Model parameters, sensitivity tensors, potentials and hypothesis checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, OutOfRegimeError, ParameterError
from .grid import ScalarField, VectorField
from .operators import div_arrays

log = logging.getLogger(__name__)

REGIME_THRESHOLD = Fraction(10, 9)
FAMILIES = ("scalar", "rotational", "saturating")


def _finite(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{name} must be a real number, got {value!r}") from exc
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Physical and regularisation parameters.

    ``dim`` is the physical dimension the run claims to model; ``1`` is
    accepted for reduced porous-medium studies but fails the dimension
    hypothesis in :func:`validate_params`.
    """

    m: float
    kappa: float = 1.0
    c_d_lower: float = 1.0
    c_d_upper: float | None = None
    epsilon: float = 0.1
    dim: int = 2

    def __post_init__(self):
        for name in ("m", "kappa", "c_d_lower", "epsilon"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        upper = self.c_d_lower if self.c_d_upper is None else _finite("c_d_upper", self.c_d_upper)
        object.__setattr__(self, "c_d_upper", upper)
        if self.dim not in (1, 2, 3):
            raise ParameterError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if self.m <= 0:
            raise ParameterError(f"diffusion exponent m must be positive, got {self.m}")
        if not 0 < self.c_d_lower <= self.c_d_upper:
            raise ParameterError(f"need 0 < C_D <= C_Dbar, got {self.c_d_lower}, {self.c_d_upper}")
        if not 0 < self.epsilon <= 1:
            raise ParameterError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def theorem_regime(self):
        return self.m > float(REGIME_THRESHOLD)

    def with_epsilon(self, eps):
        return ModelParams(self.m, self.kappa, self.c_d_lower, self.c_d_upper, eps, self.dim)


def rotation_matrix(dim, theta=0.0, axis=None):
    if dim == 1:
        return np.ones((1, 1))
    if dim == 2:
        ct, st = math.cos(theta), math.sin(theta)
        return np.array([[ct, -st], [st, ct]])
    k = np.asarray(axis if axis is not None else (0.0, 0.0, 1.0), dtype=float)
    norm = np.linalg.norm(k)
    if norm == 0:
        raise ParameterError("rotation axis must be nonzero")
    k = k / norm
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * kx + (1 - math.cos(theta)) * kx @ kx


@dataclass(frozen=True)
class SensitivitySpec:
    """Tensor-valued sensitivity ``S(x, n, c)`` with ``|S|_F <= S_0(c)``.

    ``s0_coeffs[k]`` multiplies ``c**k``; nonnegative coefficients make
    ``S_0`` nondecreasing on ``[0, inf)``.  Every family is normalised so
    that the Frobenius norm of ``S`` never exceeds ``S_0(c)``:

    * ``scalar``: ``S_0(c) / sqrt(d) * I``
    * ``rotational``: ``S_0(c) / sqrt(d) * R`` with ``R`` a rotation, so the
      norm equals ``S_0(c)`` exactly
    * ``saturating``: ``S_0(c) / ((1 + n) sqrt(d)) * I``
    """

    family: str = "scalar"
    s0_coeffs: tuple = (1.0,)
    theta: float = 0.0
    axis: tuple | None = None
    dim: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown sensitivity family {self.family!r}; expected one of {FAMILIES}")
        coeffs = tuple(_finite("s0 coefficient", c) for c in self.s0_coeffs)
        if not coeffs:
            raise ParameterError("s0_coeffs must not be empty")
        if any(c < 0 for c in coeffs):
            raise ParameterError(f"S_0 coefficients must be nonnegative, got {coeffs}")
        object.__setattr__(self, "s0_coeffs", coeffs)
        object.__setattr__(self, "theta", _finite("theta", self.theta))
        if self.family == "rotational" and self.dim == 1:
            raise ParameterError("rotational sensitivity needs dim >= 2")
        base = rotation_matrix(self.dim, self.theta, self.axis) if self.family == "rotational" else np.eye(self.dim)
        base = base / math.sqrt(self.dim)
        base.flags.writeable = False
        object.__setattr__(self, "_base", base)

    @property
    def base_matrix(self):
        """Unit-Frobenius-norm matrix multiplied by the scalar profile."""
        return self._base

    @property
    def is_zero(self):
        return all(c == 0 for c in self.s0_coeffs)

    def s0(self, c):
        c = np.asarray(c, dtype=float)
        out = np.zeros_like(c)
        for coeff in reversed(self.s0_coeffs):
            out = out * c + coeff
        return out

    def profile(self, n, c):
        """Scalar factor multiplying :attr:`base_matrix`."""
        s = self.s0(c)
        if self.family == "saturating":
            s = s / (1.0 + np.asarray(n, dtype=float))
        return s

    def tensor(self, x, n, c):
        """Vectorised ``S``: ``n`` and ``c`` broadcast, result ``(..., d, d)``."""
        prof = np.asarray(self.profile(n, c))
        return prof[..., None, None] * self._base


def eval_sensitivity(s, x, n, c):
    """Evaluate ``S(x, n, c)`` at one point."""
    if n < 0 or c < 0:
        raise DomainError(f"sensitivity needs n >= 0 and c >= 0, got n={n}, c={c}")
    if len(np.atleast_1d(x)) != s.dim:
        raise DomainError(f"point {x} does not have dimension {s.dim}")
    return s.tensor(x, float(n), float(c))


@dataclass(frozen=True)
class PotentialSpec:
    """Gravitational potential gradient, constant or sampled at cell centres."""

    grad_phi: object

    def __post_init__(self):
        g = np.array(self.grad_phi, dtype=float, copy=True)
        g.flags.writeable = False
        object.__setattr__(self, "grad_phi", g)

    @property
    def is_constant(self):
        return self.grad_phi.ndim == 1

    @property
    def sup_norm(self):
        g = self.grad_phi
        if self.is_constant:
            return float(np.linalg.norm(g))
        return float(np.sqrt(np.sum(g * g, axis=0)).max())

    def component_at_cells(self, axis, grid):
        if self.is_constant:
            return np.full(grid.dims, self.grad_phi[axis])
        return self.grad_phi[axis]


@dataclass(frozen=True)
class InitialData:
    n0: ScalarField
    c0: ScalarField
    u0: VectorField


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    theorem_regime: bool = False
    override: bool = False

    def add(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self):
        return not self.failures

    @property
    def may_start(self):
        # the override only waives the m > 10/9 hypothesis
        blocking = [c for c in self.failures if not (self.override and c.name == "theorem_regime")]
        return not blocking

    def to_dict(self):
        return {
            "theorem_regime": self.theorem_regime,
            "override": self.override,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def validate_params(p, s, phi, init=None, override=False, div_tol=1e-9, samples=1000):
    """Check every standing hypothesis and report pass/fail per item.

    Deterministic: the sensitivity samples come from a fixed seed.
    """
    rep = ValidationReport(theorem_regime=p.theorem_regime, override=override)
    rep.add("dimension", p.dim in (2, 3), f"dim={p.dim}")
    rep.add("diffusion_bracket", 0 < p.c_d_lower <= p.c_d_upper, f"C_D={p.c_d_lower}, C_Dbar={p.c_d_upper}")
    rep.add("theorem_regime", p.theorem_regime, f"m={p.m} vs 10/9={float(REGIME_THRESHOLD):.6f}")
    if not p.theorem_regime:
        log.warning("m=%s is not above 10/9; global existence is not covered", p.m)

    rep.add("sensitivity_dim", s.dim == p.dim, f"S dim={s.dim}, model dim={p.dim}")
    rng = np.random.default_rng(20240611)
    n = rng.uniform(0, 100, samples)
    c = rng.uniform(0, 100, samples)
    x = rng.uniform(0, 1, (samples, s.dim))
    norms = np.linalg.norm(s.tensor(x, n, c), axis=(-2, -1))
    excess = float(np.max(norms - s.s0(c)))
    rep.add("sensitivity_bound", excess <= 1e-12, f"max(|S|_F - S_0(c)) = {excess:.3e}")
    rep.add("s0_nondecreasing", all(k >= 0 for k in s.s0_coeffs), f"coeffs={s.s0_coeffs}")

    sup = phi.sup_norm
    rep.add("potential_w1inf", math.isfinite(sup), f"|grad phi|_inf={sup}")
    gdim = phi.grad_phi.shape[0]
    rep.add("potential_dim", gdim == p.dim, f"grad phi has {gdim} components")

    if init is not None:
        rep.add("n0_nonnegative", float(init.n0.data.min()) >= 0, f"min n0={init.n0.data.min():.3e}")
        rep.add("c0_nonnegative", float(init.c0.data.min()) >= 0, f"min c0={init.c0.data.min():.3e}")
        u = init.u0
        div = float(np.abs(div_arrays(u.comps, u.grid.h)).max()) if u.grid.ndim else 0.0
        scale = max(u.max_abs() / u.grid.hmin, 1.0)
        rep.add("u0_solenoidal", div <= div_tol * scale, f"max|div u0|={div:.3e}")
        rep.add("grid_dim", init.n0.grid.ndim == p.dim, f"grid dim={init.n0.grid.ndim}")
    return rep


def theorem_exponents(m):
    """Space-time integrability exponents of the regularised solutions.

    Returns exact rationals for rational input.  At ``m == 2`` the
    ``m <= 2`` branch applies.  Raises ``OutOfRegimeError`` for ``m <= 10/9``.
    """
    mq = Fraction(m)
    if mq <= REGIME_THRESHOLD:
        raise OutOfRegimeError(f"exponent table needs m > 10/9, got {m}")
    if mq <= 2:
        return ExponentTable(
            n_exponent=(3 * mq + 2) / 3,
            grad_n_exponent=(3 * mq + 2) / 4,
            flux_exponent=4 * (3 * mq + 2) / (3 * mq + 14),
            transport_exponent=Fraction(20, 11),
        )
    return ExponentTable(
        n_exponent=8 * (mq - 1) / 3,
        grad_n_exponent=None,
        flux_exponent=8 * (mq - 1) / (4 * mq - 1),
        transport_exponent=Fraction(5, 4),
    )


@dataclass(frozen=True)
class ExponentTable:
    n_exponent: Fraction
    grad_n_exponent: Fraction | None
    flux_exponent: Fraction
    transport_exponent: Fraction

    def as_tuple(self):
        return (self.n_exponent, self.grad_n_exponent, self.flux_exponent, self.transport_exponent)
