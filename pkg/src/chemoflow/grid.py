"""Uniform box grids with cell-centred scalars and MAC face-staggered vectors.

Scalar data of shape ``dims`` live at cell centres.  Component ``a`` of a
vector field lives on the faces normal to axis ``a`` and therefore has one
extra entry along that axis; index ``0`` and ``dims[a]`` are the two wall
faces.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ShapeError

NEUMANN = "neumann-zero-flux"
DIRICHLET = "dirichlet-zero"


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box ``[0, L_0] x ... x [0, L_{d-1}]`` split into equal cells."""

    dims: tuple
    extents: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        extents = tuple(float(e) for e in self.extents)
        if len(dims) != len(extents) or not 1 <= len(dims) <= 3:
            raise ShapeError(f"dims {dims} and extents {extents} must have equal length 1..3")
        if min(dims) < 4:
            raise ShapeError(f"need at least 4 cells per axis, got {dims}")
        if not all(np.isfinite(e) and e > 0 for e in extents):
            raise DomainError(f"extents must be positive and finite, got {extents}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "extents", extents)

    @classmethod
    def unit(cls, n, dim=2, length=1.0):
        return cls((n,) * dim, (length,) * dim)

    @property
    def ndim(self):
        return len(self.dims)

    @cached_property
    def h(self):
        return tuple(e / n for e, n in zip(self.extents, self.dims))

    @property
    def hmin(self):
        return min(self.h)

    @cached_property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def volume(self):
        return float(np.prod(self.extents))

    def face_shape(self, axis):
        shape = list(self.dims)
        shape[axis] += 1
        return tuple(shape)

    def centers_1d(self, axis):
        return (np.arange(self.dims[axis]) + 0.5) * self.h[axis]

    def faces_1d(self, axis):
        return np.arange(self.dims[axis] + 1) * self.h[axis]

    def cell_coords(self):
        """Meshgrid of cell-centre coordinates, one array per axis."""
        return np.meshgrid(*[self.centers_1d(a) for a in range(self.ndim)], indexing="ij")

    def face_coords(self, axis):
        """Coordinates of the faces normal to ``axis``."""
        axes = [self.faces_1d(b) if b == axis else self.centers_1d(b) for b in range(self.ndim)]
        return np.meshgrid(*axes, indexing="ij")

    def refined(self, factor=2):
        return Grid(tuple(n * factor for n in self.dims), self.extents)

    def to_dict(self):
        return {"dims": list(self.dims), "extents": list(self.extents)}


class ScalarField:
    """Cell-centred field with zero-flux Neumann closure.  Data are read-only."""

    __slots__ = ("grid", "data", "bc")

    def __init__(self, grid, data, bc=NEUMANN):
        data = _frozen(data)
        if data.shape != grid.dims:
            raise ShapeError(f"scalar data shape {data.shape} != grid dims {grid.dims}")
        if not np.all(np.isfinite(data)):
            raise DomainError("scalar field contains non-finite values")
        if bc != NEUMANN:
            raise ValueError(f"unsupported scalar boundary tag {bc!r}")
        self.grid = grid
        self.data = data
        self.bc = bc

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.dims))

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.dims, float(value)))

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(*grid.cell_coords()))

    def with_data(self, data):
        return ScalarField(self.grid, data, self.bc)

    def __repr__(self):
        return f"ScalarField(dims={self.grid.dims}, min={self.data.min():.3g}, max={self.data.max():.3g})"


class VectorField:
    """MAC face field; wall-normal components are forced to exactly zero."""

    __slots__ = ("grid", "comps", "bc")

    def __init__(self, grid, comps, bc=DIRICHLET):
        if bc != DIRICHLET:
            raise ValueError(f"unsupported vector boundary tag {bc!r}")
        if len(comps) != grid.ndim:
            raise ShapeError(f"expected {grid.ndim} components, got {len(comps)}")
        frozen = []
        for a, comp in enumerate(comps):
            arr = np.array(comp, dtype=np.float64, copy=True)
            if arr.shape != grid.face_shape(a):
                raise ShapeError(f"component {a} shape {arr.shape} != {grid.face_shape(a)}")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"component {a} contains non-finite values")
            zero_walls(arr, a)
            arr.flags.writeable = False
            frozen.append(arr)
        self.grid = grid
        self.comps = tuple(frozen)
        self.bc = bc

    @classmethod
    def zeros(cls, grid):
        return cls(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.ndim)])

    @classmethod
    def from_function(cls, grid, funcs):
        return cls(grid, [f(*grid.face_coords(a)) for a, f in enumerate(funcs)])

    def with_comps(self, comps):
        return VectorField(self.grid, comps, self.bc)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_comps([x + y for x, y in zip(self.comps, other.comps)])

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_comps([x - y for x, y in zip(self.comps, other.comps)])

    def __mul__(self, s):
        return self.with_comps([s * x for x in self.comps])

    __rmul__ = __mul__

    def max_abs(self):
        return max(float(np.abs(x).max()) for x in self.comps)

    def __repr__(self):
        return f"VectorField(dims={self.grid.dims}, max|v|={self.max_abs():.3g})"


def zero_walls(arr, axis):
    """Set the two wall planes of a face array normal to ``axis`` to 0 in place."""
    idx = [slice(None)] * arr.ndim
    idx[axis] = 0
    arr[tuple(idx)] = 0.0
    idx[axis] = -1
    arr[tuple(idx)] = 0.0
    return arr


def _check_same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ShapeError(f"grid mismatch: {g} vs {f.grid}")


def integrate(f):
    """Midpoint-rule integral of a cell field over the box."""
    return float(np.sum(f.data) * f.grid.cell_volume)


def norm_lp(f, p):
    """Discrete ``L^p`` norm; ``p = inf`` gives the max-abs value."""
    p = float(p)
    if not p >= 1:
        raise DomainError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.data)
    if np.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum() * f.grid.cell_volume)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * f.grid.cell_volume))
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def face_inner(v, w):
    """Face inner product, each face weighted by one cell volume."""
    _check_same_grid(v, w)
    return float(sum(np.sum(x * y) for x, y in zip(v.comps, w.comps)) * v.grid.cell_volume)


def face_norm2(v):
    return float(np.sqrt(max(face_inner(v, v), 0.0)))


def cell_inner(f, g):
    _check_same_grid(f, g)
    return float(np.sum(f.data * g.data) * f.grid.cell_volume)


def face_to_center_arrays(comps):
    out = []
    for a, comp in enumerate(comps):
        lo = [slice(None)] * comp.ndim
        hi = [slice(None)] * comp.ndim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        out.append(0.5 * (comp[tuple(lo)] + comp[tuple(hi)]))
    return out


def face_to_center(v):
    """Average the two faces bracketing each cell, per axis."""
    return [ScalarField(v.grid, c) for c in face_to_center_arrays(v.comps)]
