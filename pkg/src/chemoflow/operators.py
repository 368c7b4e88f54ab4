"""Second-order finite-volume stencils on the MAC grid.

The array-level kernels (``*_arrays``) take plain ``numpy`` arrays and the
spacing tuple; the field-level wrappers check grids and boundary tags.  The
gradient writes zero on wall faces, so ``divergence(gradient(f))`` is the
zero-flux Laplacian and the pair is adjoint under the cell/face inner
products (summation by parts).
"""
from __future__ import annotations

import numpy as np

from .errors import CFLViolation, DomainError, ShapeError
from .grid import DIRICHLET, NEUMANN, ScalarField, VectorField, _check_same_grid


def _sl(ndim, axis, s):
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def grad_arrays(f, h):
    out = []
    for a in range(f.ndim):
        shape = list(f.shape)
        shape[a] += 1
        g = np.zeros(shape)
        g[_sl(f.ndim, a, slice(1, -1))] = np.diff(f, axis=a) / h[a]
        out.append(g)
    return out


def div_arrays(comps, h):
    out = np.diff(comps[0], axis=0) / h[0]
    for a in range(1, len(comps)):
        out = out + np.diff(comps[a], axis=a) / h[a]
    return out


def face_average(f, axis):
    """Arithmetic mean of the two cells sharing each face; zero on walls."""
    shape = list(f.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    n = f.ndim
    out[_sl(n, axis, slice(1, -1))] = 0.5 * (f[_sl(n, axis, slice(None, -1))] + f[_sl(n, axis, slice(1, None))])
    return out


def upwind_face_values(f, vel, axis):
    """Cell value upstream of each face for face velocity ``vel``."""
    n = f.ndim
    out = np.zeros(vel.shape)
    left = f[_sl(n, axis, slice(None, -1))]
    right = f[_sl(n, axis, slice(1, None))]
    inner = vel[_sl(n, axis, slice(1, -1))]
    out[_sl(n, axis, slice(1, -1))] = np.where(inner > 0, left, right)
    return out


def outflow_rate(comps, h, inflow=False):
    """Per-cell sum of outgoing (or incoming) face speeds over the spacing.

    ``dt * outflow_rate <= 1`` is the sharp positivity condition for the
    conservative upwind form; the advective form needs the inflow rate.
    """
    n = comps[0].ndim
    sign = -1.0 if inflow else 1.0
    rate = 0.0
    for a, v in enumerate(comps):
        right = np.maximum(sign * v[_sl(n, a, slice(1, None))], 0.0)
        left = np.maximum(-sign * v[_sl(n, a, slice(None, -1))], 0.0)
        rate = rate + (right + left) / h[a]
    return rate


def advective_upwind_arrays(f, comps, h):
    """``-v.grad f`` in upwind difference form.

    Each face adds ``|v| (f_upstream - f_cell) / h`` to its downstream
    cell only, so the increment at a cell maximum is a sum of nonpositive
    terms and the maximum principle survives floating point.
    """
    nd = f.ndim
    out = np.zeros(f.shape)
    for a, v in enumerate(comps):
        left = f[_sl(nd, a, slice(None, -1))]
        right = f[_sl(nd, a, slice(1, None))]
        vin = v[_sl(nd, a, slice(1, -1))]
        diff = right - left
        # face speeds into the right cell (v > 0) and into the left cell (v < 0)
        out[_sl(nd, a, slice(1, None))] -= np.maximum(vin, 0.0) * diff / h[a]
        out[_sl(nd, a, slice(None, -1))] -= np.minimum(vin, 0.0) * diff / h[a]
    return out


def upwind_increment_arrays(f, comps, h, dt, conservative=True):
    if not conservative:
        return dt * advective_upwind_arrays(f, comps, h)
    fluxes = [v * upwind_face_values(f, v, a) for a, v in enumerate(comps)]
    return -dt * div_arrays(fluxes, h)


def centered_cell_gradient(f, h):
    """Cell-centred gradient: mean of the two bracketing face differences."""
    out = []
    for a, g in enumerate(grad_arrays(f, h)):
        n = g.ndim
        out.append(0.5 * (g[_sl(n, a, slice(None, -1))] + g[_sl(n, a, slice(1, None))]))
    return out


def _second_difference(f, axis, h):
    n = f.ndim
    out = np.empty_like(f)
    sl = lambda s: _sl(n, axis, s)  # noqa: E731
    out[sl(slice(1, -1))] = (f[sl(slice(2, None))] - 2.0 * f[sl(slice(1, -1))] + f[sl(slice(None, -2))]) / h**2
    # one-sided closure, exact for cubics
    out[sl(0)] = (2.0 * f[sl(0)] - 5.0 * f[sl(1)] + 4.0 * f[sl(2)] - f[sl(3)]) / h**2
    out[sl(-1)] = (2.0 * f[sl(-1)] - 5.0 * f[sl(-2)] + 4.0 * f[sl(-3)] - f[sl(-4)]) / h**2
    return out


def hessian_arrays(f, h):
    """Dict ``(a, b) -> d2f/dx_a dx_b`` for ``a <= b`` at cell centres."""
    out = {}
    for a in range(f.ndim):
        out[a, a] = _second_difference(f, a, h[a])
        for b in range(a + 1, f.ndim):
            da = np.gradient(f, h[a], axis=a, edge_order=2)
            out[a, b] = np.gradient(da, h[b], axis=b, edge_order=2)
    return out


def hessian_frobenius_array(f, h):
    total = 0.0
    for (a, b), d in hessian_arrays(f, h).items():
        total = total + (1.0 if a == b else 2.0) * d * d
    return np.sqrt(total)


# field-level API


def gradient(f):
    """Face-normal differences ``(f_right - f_left) / h``; wall faces are 0."""
    if f.bc != NEUMANN:
        raise ShapeError(f"gradient expects a Neumann scalar, got {f.bc!r}")
    return VectorField(f.grid, grad_arrays(f.data, f.grid.h))


def divergence(v):
    return ScalarField(v.grid, div_arrays(v.comps, v.grid.h))


def laplacian_neumann(f):
    """Zero-flux Laplacian as ``divergence(gradient(f))``."""
    return ScalarField(f.grid, div_arrays(grad_arrays(f.data, f.grid.h), f.grid.h))


def advect_scalar_upwind(f, v, dt, conservative=True):
    """Increment ``-dt * div(f v)`` with first-order upwind face values.

    With ``conservative=False`` the advective form ``-dt * v.grad f`` is
    returned instead; it preserves constants exactly even when ``v`` is only
    discretely divergence-free up to round-off.  Raises ``CFLViolation`` if
    the matching outflow (inflow) CFL number exceeds 1 anywhere.
    """
    _check_same_grid(f, v)
    if v.bc != DIRICHLET:
        raise ShapeError("advecting velocity must carry zero wall-normal flux")
    cfl = float(dt * np.max(outflow_rate(v.comps, v.grid.h, inflow=not conservative)))
    if cfl > 1.0:
        raise CFLViolation(f"upwind CFL number {cfl:.3g} > 1", cfl=cfl)
    return ScalarField(f.grid, upwind_increment_arrays(f.data, v.comps, v.grid.h, dt, conservative))


def hessian_frobenius(f):
    """Cell-centred Frobenius norm of the second-difference Hessian."""
    return ScalarField(f.grid, hessian_frobenius_array(f.data, f.grid.h))


def log_hessian_frobenius(f):
    if np.any(f.data <= 0):
        raise DomainError("log-Hessian needs a strictly positive field")
    return hessian_frobenius(f.with_data(np.log(f.data)))
