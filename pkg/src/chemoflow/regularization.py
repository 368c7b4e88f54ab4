"""Regularised diffusion, saturation, boundary cut-off and chemotactic flux."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .grid import VectorField
from .operators import _sl, centered_cell_gradient, face_average, grad_arrays


def d_eps(n, p):
    """Nondegenerate diffusivity ``C_D (n + eps)^(m-1)``."""
    n = np.asarray(n, dtype=float)
    return p.c_d_lower * (n + p.epsilon) ** (p.m - 1.0)


def f_eps(n, eps):
    """Saturation factor ``1 / (1 + eps n)``; ``n F(n) <= 1/eps``."""
    return 1.0 / (1.0 + eps * np.asarray(n, dtype=float))


@dataclass(frozen=True)
class CutoffField:
    """Boundary cut-off ``rho`` at cell centres, ``0`` on the wall ring."""

    grid: object
    values: np.ndarray
    width: float
    epsilon: float

    def face_values(self, axis):
        """Minimum of the two adjacent cells, so faces touching the ring vanish."""
        v = self.values
        n = v.ndim
        shape = list(v.shape)
        shape[axis] += 1
        out = np.zeros(shape)
        out[_sl(n, axis, slice(1, -1))] = np.minimum(v[_sl(n, axis, slice(None, -1))], v[_sl(n, axis, slice(1, None))])
        return out


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@lru_cache(maxsize=64)
def rho_eps(grid, eps):
    """Cubic-smoothstep cut-off of the distance to the boundary.

    The profile is zero for cells whose centre lies within one cell width of
    the wall and ramps to one over the width ``eps * min(extents)``.
    """
    if not 0 < eps <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {eps}")
    coords = grid.cell_coords()
    dist = np.full(grid.dims, np.inf)
    for a, x in enumerate(coords):
        dist = np.minimum(dist, np.minimum(x, grid.extents[a] - x))
    width = eps * min(grid.extents)
    offset = max(grid.h)
    values = smoothstep((dist - offset) / width)
    values.flags.writeable = False
    return CutoffField(grid, values, width, eps)


def face_gradient_vectors(c, h):
    """Full gradient of ``c`` on the faces of every axis.

    Returns ``out[a][b]``: component ``b`` of grad c on the ``a``-faces.  The
    normal component is the face difference; tangential ones average the
    centred gradients of the two adjacent cells.
    """
    normal = grad_arrays(c, h)
    centred = centered_cell_gradient(c, h)
    out = []
    for a in range(c.ndim):
        row = []
        for b in range(c.ndim):
            row.append(normal[a] if a == b else face_average(centred[b], a))
        out.append(row)
    return out


def chemotactic_velocity_arrays(n, c, s, rho, p):
    """Face velocity ``rho (S grad c)_a`` with ``S`` at centred face values."""
    grid = rho.grid
    h = grid.h
    gc = face_gradient_vectors(c, h)
    vel = []
    for a in range(grid.ndim):
        if s.is_zero:
            vel.append(np.zeros(grid.face_shape(a)))
            continue
        nf = face_average(n, a)
        cf = face_average(c, a)
        prof = s.profile(nf, cf)
        row = s.base_matrix[a]
        sv = sum(row[b] * gc[a][b] for b in range(grid.ndim) if row[b] != 0.0)
        vel.append(rho.face_values(a) * prof * sv)
    return vel


def chemotactic_flux_arrays(n, c, s, rho, p, vel=None):
    """Upwinded flux ``G(n_up) * chi`` with ``G(n) = n F_eps(n)``."""
    if vel is None:
        vel = chemotactic_velocity_arrays(n, c, s, rho, p)
    g = n * f_eps(n, p.epsilon)
    flux = []
    for a, chi in enumerate(vel):
        nd = n.ndim
        gup = np.zeros(chi.shape)
        inner = chi[_sl(nd, a, slice(1, -1))]
        gup[_sl(nd, a, slice(1, -1))] = np.where(inner > 0, g[_sl(nd, a, slice(None, -1))], g[_sl(nd, a, slice(1, None))])
        flux.append(gup * chi)
    return flux, vel


def chemotactic_flux(n, c, s, rho, p):
    """Chemotactic face flux of ``n F_eps(n) rho S . grad c`` (walls zero)."""
    if n.data.min() < 0 or c.data.min() < 0:
        raise DomainError("chemotactic flux needs nonnegative n and c")
    flux, _ = chemotactic_flux_arrays(n.data, c.data, s, rho, p)
    return VectorField(n.grid, flux)
