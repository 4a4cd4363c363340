"""Binary checkpoint format for run restart and final-state capture.

Layout (little-endian throughout):

    magic   5 bytes  b"KSLB1"
    d       u32
    n_axis  u32
    box_len f64
    t       f64
    n       n_axis^d f64 samples, row-major
    c       n_axis^d f64 samples, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import Grid, ScalarField, make_grid
from .solver import State

__all__ = ["MAGIC", "save_checkpoint", "load_checkpoint", "state_to_bytes", "state_from_bytes"]

MAGIC = b"KSLB1"
_HEADER = struct.Struct("<IIdd")


def state_to_bytes(state: State) -> bytes:
    grid = state.grid
    header = MAGIC + _HEADER.pack(grid.d, grid.n_axis, grid.box_len, state.t)
    n_bytes = np.ascontiguousarray(state.n.values, dtype="<f8").tobytes()
    c_bytes = np.ascontiguousarray(state.c.values, dtype="<f8").tobytes()
    return header + n_bytes + c_bytes


def state_from_bytes(blob: bytes) -> State:
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError("not a checkpoint: bad magic bytes")
    offset = len(MAGIC)
    d, n_axis, box_len, t = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size
    grid = make_grid(d, n_axis, box_len)
    count = grid.npoints
    expected = offset + 2 * count * 8
    if len(blob) != expected:
        raise ValueError(
            f"checkpoint truncated or padded: expected {expected} bytes, got {len(blob)}"
        )
    n_vals = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
    c_vals = np.frombuffer(blob, dtype="<f8", count=count, offset=offset + count * 8)
    return State(
        t=t,
        n=ScalarField(grid, n_vals.reshape(grid.shape).copy()),
        c=ScalarField(grid, c_vals.reshape(grid.shape).copy()),
    )


def save_checkpoint(path: str | Path, state: State) -> None:
    Path(path).write_bytes(state_to_bytes(state))


def load_checkpoint(path: str | Path) -> State:
    return state_from_bytes(Path(path).read_bytes())
