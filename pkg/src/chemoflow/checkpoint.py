"""Binary checkpoints: one JSON header line, then little-endian float64 blocks.

Layout::

    {"format": "chemoflow-checkpoint", "version": 1, "time": ..., "step": ...,
     "grid": {...}, "fields": [{"name", "shape", "bc"}, ...], "meta": {...}}\\n
    <n block><c block><u0 block>...<pressure block>

Blocks appear in header order, each ``prod(shape)`` values in C order.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import CheckpointFormatError, UnsupportedVersionError
from .grid import DIRICHLET, NEUMANN, Grid, ScalarField, VectorField
from .stokes import StokesState

FORMAT = "chemoflow-checkpoint"
VERSION = 1
DTYPE = "<f8"


def _blocks(state):
    grid = state.n.grid
    yield "n", state.n.data, NEUMANN
    yield "c", state.c.data, NEUMANN
    for a in range(grid.ndim):
        yield f"u{a}", state.u.comps[a], DIRICHLET
    yield "pressure", state.stokes.pressure.data, NEUMANN


def save_checkpoint(state, path, meta=None):
    grid = state.n.grid
    blocks = list(_blocks(state))
    header = {
        "format": FORMAT,
        "version": VERSION,
        "time": float(state.t),
        "step": int(state.step),
        "grid": grid.to_dict(),
        "dtype": DTYPE,
        "fields": [{"name": name, "shape": list(arr.shape), "bc": bc} for name, arr, bc in blocks],
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, arr, _ in blocks:
            fh.write(np.ascontiguousarray(arr, dtype=DTYPE).tobytes(order="C"))


def read_header(path):
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: unreadable header ({exc})") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise CheckpointFormatError(f"{path}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
    return header, payload


def _expected_shape(grid, name):
    if name in ("n", "c", "pressure"):
        return grid.dims
    if name.startswith("u") and name[1:].isdigit() and int(name[1:]) < grid.ndim:
        return grid.face_shape(int(name[1:]))
    return None


def load_checkpoint(path):
    """Return ``(State, header)``; raises on any inconsistency."""
    from .timestepper import State

    header, payload = read_header(path)
    try:
        g = header["grid"]
        grid = Grid(tuple(g["dims"]), tuple(g["extents"]))
        fields = header["fields"]
        t = float(header["time"])
        step = int(header["step"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: malformed header ({exc})") from exc
    expected = ["n", "c"] + [f"u{a}" for a in range(grid.ndim)] + ["pressure"]
    names = [f.get("name") for f in fields]
    if names != expected:
        raise CheckpointFormatError(f"{path}: field list {names} != {expected}")
    arrays = {}
    offset = 0
    for f in fields:
        name = f["name"]
        shape = tuple(f.get("shape", ()))
        if shape != _expected_shape(grid, name):
            raise CheckpointFormatError(
                f"{path}: field {name!r} shape {shape} does not match grid (expected {_expected_shape(grid, name)})", field=name
            )
        nbytes = int(np.prod(shape)) * 8
        if offset + nbytes > len(payload):
            raise CheckpointFormatError(f"{path}: payload truncated inside field {name!r}", field=name)
        arrays[name] = np.frombuffer(payload, dtype=DTYPE, count=int(np.prod(shape)), offset=offset).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointFormatError(f"{path}: {len(payload) - offset} trailing bytes after last field")
    u = VectorField(grid, [arrays[f"u{a}"] for a in range(grid.ndim)])
    state = State(
        ScalarField(grid, arrays["n"]),
        ScalarField(grid, arrays["c"]),
        StokesState(u, ScalarField(grid, arrays["pressure"])),
        t,
        step,
    )
    return state, header


def checkpoint_roundtrip(state, path):
    save_checkpoint(state, path)
    return load_checkpoint(path)[0]
