"""Bit-exact little-endian binary snapshots for restartable runs."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointFormatError
from .fields import QTensorField, StateSnapshot, VelocityField
from .grid import make_grid
from .params import ModelParams

MAGIC = b"BESIM1"
ENDIAN_TAG = b"<"
LAYOUT = b"Q6u3:f8:C"  # six Q components then three u components, C order

_HEAD = struct.Struct("<6sc3I3d7ddH")


@dataclass(frozen=True)
class CheckpointHeader:
    dims: tuple[int, int, int]
    box: tuple[float, float, float]
    params: ModelParams
    time: float
    layout: bytes = LAYOUT

    @property
    def payload_bytes(self) -> int:
        n = self.dims[0] * self.dims[1] * self.dims[2]
        return n * 9 * 8


def write_checkpoint(state: StateSnapshot, path) -> None:
    p = state.params
    header = _HEAD.pack(
        MAGIC,
        ENDIAN_TAG,
        *state.grid.dims,
        *state.grid.box,
        p.a, p.b, p.c, p.L, p.Gamma, p.mu, p.xi,
        state.time,
        len(LAYOUT),
    )
    q_bytes = np.ascontiguousarray(state.Q.components, dtype="<f8").tobytes()
    u_bytes = np.ascontiguousarray(state.u.components, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(LAYOUT)
        fh.write(q_bytes)
        fh.write(u_bytes)


def read_checkpoint(path) -> StateSnapshot:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {exc}") from exc

    if len(raw) < _HEAD.size:
        raise CheckpointFormatError(f"{path}: file shorter than the fixed header")
    fields = _HEAD.unpack_from(raw, 0)
    magic, endian = fields[0], fields[1]
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if endian != ENDIAN_TAG:
        raise CheckpointFormatError(f"{path}: unsupported endianness tag {endian!r}")
    dims = tuple(int(v) for v in fields[2:5])
    box = tuple(float(v) for v in fields[5:8])
    a, b, c, L, Gamma, mu, xi = fields[8:15]
    time = float(fields[15])
    layout_len = int(fields[16])

    offset = _HEAD.size
    layout = raw[offset:offset + layout_len]
    if layout != LAYOUT:
        raise CheckpointFormatError(f"{path}: unknown payload layout {layout!r}")
    offset += layout_len

    header = CheckpointHeader(dims=dims, box=box, params=ModelParams(a, b, c, L, Gamma, mu, xi), time=time)
    expected = header.payload_bytes
    actual = len(raw) - offset
    if actual != expected:
        raise CheckpointFormatError(
            f"{path}: payload length mismatch, expected {expected} bytes, got {actual}"
        )
    grid = make_grid(dims, box)
    n = grid.n_points
    data = np.frombuffer(raw, dtype="<f8", count=9 * n, offset=offset)
    q = data[: 6 * n].reshape((6,) + dims).astype(np.float64)
    u = data[6 * n:].reshape((3,) + dims).astype(np.float64)
    return StateSnapshot(time, QTensorField(grid, q), VelocityField(grid, u), header.params)
