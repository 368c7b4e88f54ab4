"""Helmholtz projection, Yosida resolvent and the velocity update.

On the uniform box both linear solves the velocity update needs are
diagonalised by fast trigonometric transforms:

* the zero-flux pressure Poisson problem on cell centres by DCT-II;
* the no-slip Helmholtz problem ``(I - a Lap) v = r`` on the MAC faces by
  DST-I along a component's own axis (wall faces carry the zero value) and
  DST-II across the other axes (ghost value ``-v`` mirrored at the wall).

Both are exact inverses of the stencils in :mod:`chemoflow.operators` up to
round-off.  The Yosida resolvent ``(I + eps A)^{-1}`` with ``A = P(-Lap)`` does
not diagonalise (``P`` and ``Lap`` do not commute near walls), so it is
solved by preconditioned conjugate gradients on the solenoidal subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft

from .errors import SolverError
from .grid import ScalarField, VectorField, face_inner
from .operators import _sl, div_arrays, face_average, grad_arrays


@dataclass(frozen=True)
class SolverSettings:
    projection_tol: float = 1e-10
    yosida_tol: float = 1e-9
    yosida_max_iter: int = 200
    contraction_slack: float = 1e-8

    def to_dict(self):
        return {
            "projection_tol": self.projection_tol,
            "yosida_tol": self.yosida_tol,
            "yosida_max_iter": self.yosida_max_iter,
        }


def _eig_1d(n, h, kind):
    """Eigenvalues of the 1D negative second difference for one closure."""
    if kind == "neumann":
        k = np.arange(n)
    elif kind == "dirichlet_faces":
        k = np.arange(1, n)
    else:  # dirichlet_cells, wall midway to the ghost
        k = np.arange(1, n + 1)
    return (2.0 - 2.0 * np.cos(np.pi * k / n)) / h**2


def _outer_sum(vectors):
    total = np.zeros([len(v) for v in vectors])
    for a, v in enumerate(vectors):
        shape = [1] * len(vectors)
        shape[a] = len(v)
        total = total + v.reshape(shape)
    return total


@lru_cache(maxsize=32)
def _neumann_eigs(grid):
    return _outer_sum([_eig_1d(n, h, "neumann") for n, h in zip(grid.dims, grid.h)])


@lru_cache(maxsize=32)
def _velocity_eigs(grid, axis):
    vecs = []
    for b, (n, h) in enumerate(zip(grid.dims, grid.h)):
        vecs.append(_eig_1d(n, h, "dirichlet_faces" if b == axis else "dirichlet_cells"))
    return _outer_sum(vecs)


def _dst_forward(x, axis):
    for b in range(x.ndim):
        x = fft.dst(x, type=1 if b == axis else 2, axis=b, norm="ortho")
    return x


def _dst_inverse(x, axis):
    for b in range(x.ndim):
        x = fft.idst(x, type=1 if b == axis else 2, axis=b, norm="ortho")
    return x


def poisson_neumann_arrays(rhs, grid):
    """Mean-zero ``p`` with ``div grad p = rhs - mean(rhs)``."""
    lam = _neumann_eigs(grid)
    rhat = fft.dctn(rhs - rhs.mean(), type=2, norm="ortho")
    phat = np.zeros_like(rhat)
    nz = lam > 0
    phat[nz] = -rhat[nz] / lam[nz]
    return fft.idctn(phat, type=2, norm="ortho")


def helmholtz_arrays(comps, alpha, grid):
    """Solve ``(I - alpha Lap) v = r`` per component with no-slip walls."""
    out = []
    for a, r in enumerate(comps):
        inner = r[_sl(r.ndim, a, slice(1, -1))]
        lam = _velocity_eigs(grid, a)
        vhat = _dst_forward(inner, a) / (1.0 + alpha * lam)
        v = np.zeros(r.shape)
        v[_sl(r.ndim, a, slice(1, -1))] = _dst_inverse(vhat, a)
        out.append(v)
    return out


def vector_laplacian_arrays(comps, grid):
    """Componentwise Laplacian on MAC faces with no-slip closure.

    Along the component's own axis the wall faces hold zero; across the
    other axes the ghost value is ``-v`` so the wall sits between ghost and
    first cell.  Wall rows of the result are zero.
    """
    h = grid.h
    out = []
    for a, u in enumerate(comps):
        nd = u.ndim
        lap = np.zeros(u.shape)
        for b in range(nd):
            if b == a:
                lap[_sl(nd, a, slice(1, -1))] += (
                    u[_sl(nd, a, slice(2, None))] - 2.0 * u[_sl(nd, a, slice(1, -1))] + u[_sl(nd, a, slice(None, -2))]
                ) / h[b] ** 2
            else:
                ext = np.concatenate([-u[_sl(nd, b, slice(0, 1))], u, -u[_sl(nd, b, slice(-1, None))]], axis=b)
                lap += (
                    ext[_sl(nd, b, slice(2, None))] - 2.0 * u + ext[_sl(nd, b, slice(None, -2))]
                ) / h[b] ** 2
        lap[_sl(nd, a, 0)] = 0.0
        lap[_sl(nd, a, -1)] = 0.0
        out.append(lap)
    return out


def dirichlet_energy_arrays(comps, grid):
    """``int |grad u|^2`` as ``<-Lap u, u>`` on the faces."""
    lap = vector_laplacian_arrays(comps, grid)
    return float(-sum(np.sum(l * u) for l, u in zip(lap, comps)) * grid.cell_volume)


def convection_skew_arrays(b, u, grid):
    """Skew-symmetric convection ``1/2[(b.grad)u + div(b (x) u)]`` on faces.

    Central fluxes with the ``u_i`` diagonal removed give an antisymmetric
    operator, so ``<C(b) u, u> = 0`` to round-off for any ``b``.  Flux
    through walls vanishes because the wall-normal part of ``b`` is zero.
    """
    h = grid.h
    out = []
    for a, ua in enumerate(u):
        nd = ua.ndim
        acc = np.zeros(ua.shape)
        for beta in range(nd):
            if beta == a:
                # dual faces at cell centres: mean of b_a on the two a-faces
                bbar = 0.5 * (b[a][_sl(nd, a, slice(None, -1))] + b[a][_sl(nd, a, slice(1, None))])
                plus = bbar * ua[_sl(nd, a, slice(1, None))]
                minus = bbar * ua[_sl(nd, a, slice(None, -1))]
                acc[_sl(nd, a, slice(None, -1))] += plus / (2.0 * h[a])
                acc[_sl(nd, a, slice(1, None))] -= minus / (2.0 * h[a])
            else:
                # edges: b_beta averaged along a onto the a-face positions
                bb = b[beta]
                pad_shape = list(bb.shape)
                pad_shape[a] += 1
                bpad = np.zeros(pad_shape)
                bpad[_sl(nd, a, slice(1, -1))] = 0.5 * (
                    bb[_sl(nd, a, slice(None, -1))] + bb[_sl(nd, a, slice(1, None))]
                )
                bpad[_sl(nd, a, 0)] = 0.5 * bb[_sl(nd, a, 0)]
                bpad[_sl(nd, a, -1)] = 0.5 * bb[_sl(nd, a, -1)]
                bbar = bpad[_sl(nd, beta, slice(1, -1))]
                plus = bbar * ua[_sl(nd, beta, slice(1, None))]
                minus = bbar * ua[_sl(nd, beta, slice(None, -1))]
                acc[_sl(nd, beta, slice(None, -1))] += plus / (2.0 * h[beta])
                acc[_sl(nd, beta, slice(1, None))] -= minus / (2.0 * h[beta])
        acc[_sl(nd, a, 0)] = 0.0
        acc[_sl(nd, a, -1)] = 0.0
        out.append(acc)
    return out


def project_arrays(comps, grid):
    """Return ``(w, q)`` with ``w = v - grad q`` discretely solenoidal."""
    q = poisson_neumann_arrays(div_arrays(comps, grid.h), grid)
    g = grad_arrays(q, grid.h)
    return [v - gq for v, gq in zip(comps, g)], q


class PoissonSolver:
    """Zero-flux pressure Poisson solver with a residual guarantee.

    The solve itself is a direct cosine-transform inversion; the residual is
    measured afterwards and a :class:`SolverError` is raised if it exceeds
    ``tolerance`` relative to the right-hand side.
    """

    def __init__(self, grid, tolerance=1e-10, max_iterations=1):
        self.grid = grid
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.last_residual = 0.0

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        p = poisson_neumann_arrays(rhs, self.grid)
        r = rhs - rhs.mean() - div_arrays(grad_arrays(p, self.grid.h), self.grid.h)
        scale = max(float(np.abs(rhs).max()), np.finfo(float).tiny)
        self.last_residual = float(np.abs(r).max()) / scale
        if self.last_residual > self.tolerance:
            raise SolverError(f"Poisson residual {self.last_residual:.3e} > {self.tolerance:.1e}", residual=self.last_residual)
        return p


@dataclass(frozen=True)
class StokesState:
    u: VectorField
    pressure: ScalarField


@dataclass
class YosidaInfo:
    iterations: int = 0
    residual: float = 0.0


class StokesSolver:
    """Per-simulation velocity solver; keeps a warm start for the resolvent."""

    def __init__(self, grid, settings=None):
        self.grid = grid
        self.settings = settings or SolverSettings()
        self.poisson = PoissonSolver(grid, self.settings.projection_tol)
        self._warm = None
        self.last_yosida = YosidaInfo()

    # projection

    def project_comps(self, comps):
        q = self.poisson.solve(div_arrays(comps, self.grid.h))
        g = grad_arrays(q, self.grid.h)
        return [v - gq for v, gq in zip(comps, g)], q

    def project(self, v):
        w, q = self.project_comps(v.comps)
        return VectorField(self.grid, w), ScalarField(self.grid, q)

    # Yosida resolvent

    def _inner(self, x, y):
        return sum(float(np.sum(a * b)) for a, b in zip(x, y))

    def yosida_comps(self, w, eps, x0=None):
        grid = self.grid
        s = self.settings
        w, _ = self.project_comps(w)
        wnorm = np.sqrt(self._inner(w, w))
        info = YosidaInfo()
        self.last_yosida = info
        if wnorm == 0.0 or eps == 0.0:
            return [x.copy() for x in w]

        def apply_a(x):
            lap = vector_laplacian_arrays(x, grid)
            plap, _ = self.project_comps(lap)
            return [xi - eps * li for xi, li in zip(x, plap)]

        def precond(r):
            z, _ = self.project_comps(helmholtz_arrays(r, eps, grid))
            return z

        if x0 is None:
            x = precond(w)
        else:
            x, _ = self.project_comps(x0)
        ax = apply_a(x)
        r = [wi - ai for wi, ai in zip(w, ax)]
        z = precond(r)
        d = [zi.copy() for zi in z]
        rz = self._inner(r, z)
        res = np.sqrt(self._inner(r, r)) / wnorm
        it = 0
        while res > s.yosida_tol:
            if it >= s.yosida_max_iter:
                raise SolverError(f"Yosida PCG stalled at residual {res:.3e}", residual=res, iterations=it)
            ad = apply_a(d)
            alpha = rz / self._inner(d, ad)
            x = [xi + alpha * di for xi, di in zip(x, d)]
            r = [ri - alpha * ai for ri, ai in zip(r, ad)]
            res = np.sqrt(self._inner(r, r)) / wnorm
            it += 1
            if res <= s.yosida_tol:
                break
            z = precond(r)
            rz_new = self._inner(r, z)
            d = [zi + (rz_new / rz) * di for zi, di in zip(z, d)]
            rz = rz_new
        info.iterations, info.residual = it, res
        xnorm = np.sqrt(self._inner(x, x))
        if xnorm > wnorm * (1.0 + s.contraction_slack):
            raise SolverError(f"Yosida output norm {xnorm:.6e} exceeds input {wnorm:.6e}", residual=res, iterations=it)
        return x

    def yosida_apply(self, w, eps, warm=False):
        x0 = self._warm if warm and self._warm is not None else None
        out = self.yosida_comps(w.comps, eps, x0=x0)
        if warm:
            self._warm = out
        return VectorField(self.grid, out)

    # velocity update

    def velocity_step(self, state, n, p, phi, dt):
        """Convection, buoyancy, implicit viscosity, then projection.

        ``u* = (I - dt Lap)^{-1} P(u + dt(-kappa C(Y u) u + n grad phi))`` and
        ``(u_new, q) = P u*``.  The returned pressure is the sum of both
        projection potentials over ``dt``.
        """
        grid = self.grid
        u = state.u.comps
        nd = n.data if isinstance(n, ScalarField) else n
        rhs = [x.copy() for x in u]
        if p.kappa != 0.0 and any(np.any(x != 0.0) for x in u):
            b = self.yosida_comps(u, p.epsilon, x0=self._warm)
            self._warm = b
            conv = convection_skew_arrays(b, u, grid)
            for a in range(grid.ndim):
                rhs[a] -= dt * p.kappa * conv[a]
        else:
            self.last_yosida = YosidaInfo()
        if phi is not None:
            for a in range(grid.ndim):
                g = phi.component_at_cells(a, grid)
                if np.any(g != 0.0):
                    rhs[a] += dt * face_average(nd * g, a)
        # projecting the explicit part first keeps gradient forcing exactly inert
        rhs, q0 = self.project_comps(rhs)
        ustar = helmholtz_arrays(rhs, dt, grid)
        unew, q1 = self.project_comps(ustar)
        return StokesState(VectorField(grid, unew), ScalarField(grid, (q0 + q1) / dt))


@lru_cache(maxsize=16)
def _default_solver(grid):
    return StokesSolver(grid)


def project(v, tol=None):
    """Helmholtz projection of ``v``; returns ``(w, q)`` with ``v = w + grad q``."""
    solver = _default_solver(v.grid) if tol is None else StokesSolver(v.grid, SolverSettings(projection_tol=tol))
    return solver.project(v)


def yosida_apply(w, eps, settings=None):
    """``(I + eps A)^{-1} w`` for the discrete Stokes operator ``A``."""
    solver = _default_solver(w.grid) if settings is None else StokesSolver(w.grid, settings)
    return solver.yosida_apply(w, eps)


def velocity_step(state, n, p, phi, dt, settings=None):
    solver = StokesSolver(state.u.grid, settings)
    return solver.velocity_step(state, n, p, phi, dt)


def stokes_operator_apply(v):
    """``A v = P(-Lap v)`` for a solenoidal face field."""
    solver = _default_solver(v.grid)
    lap = vector_laplacian_arrays(v.comps, v.grid)
    w, _ = solver.project_comps([-x for x in lap])
    return VectorField(v.grid, w)


def kinetic(u):
    return face_inner(u, u)
