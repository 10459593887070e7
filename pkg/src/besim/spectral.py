"""Spectral engine: transforms, derivatives, Leray projection, dealiasing.

All operations are value-in/value-out. A spectrum array may carry any
number of leading component axes in front of the three spatial axes;
vector operations (divergence, Leray) contract the *first* axis, which
must have length 3.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import ConfigurationError, DimensionError
from .grid import SpectralGrid

_SPATIAL = (-3, -2, -1)


_WORKERS: int | None = None


def fft_workers() -> int:
    """Transform worker count; BESIM_THREADS caps/overrides the default."""
    global _WORKERS
    if _WORKERS is None:
        env = os.environ.get("BESIM_THREADS")
        workers = 0
        if env:
            try:
                workers = max(1, int(env))
            except ValueError:
                workers = 0
        _WORKERS = workers or os.cpu_count() or 1
    return _WORKERS


# below this many elements the worker pool costs more than it saves
_SERIAL_CUTOFF = 1 << 16


def rfftn(values: np.ndarray) -> np.ndarray:
    """Batched real FFT over the trailing three axes (bitwise deterministic)."""
    workers = fft_workers() if values.size >= _SERIAL_CUTOFF else 1
    return _fft.rfftn(values, axes=_SPATIAL, workers=workers)


def irfftn(modes: np.ndarray, dims) -> np.ndarray:
    workers = fft_workers() if modes.size >= _SERIAL_CUTOFF else 1
    return _fft.irfftn(modes, s=dims, axes=_SPATIAL, workers=workers)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex mode coefficients on a grid, real-FFT layout."""

    grid: SpectralGrid
    modes: np.ndarray

    def __post_init__(self):
        if self.modes.shape[-3:] != self.grid.rshape:
            raise DimensionError(
                f"mode array shape {self.modes.shape} does not end in {self.grid.rshape}"
            )


def forward(grid: SpectralGrid, values: np.ndarray) -> SpectralField:
    """Forward real FFT over the last three axes."""
    values = np.asarray(values)
    if values.shape[-3:] != grid.dims:
        raise DimensionError(f"field shape {values.shape} does not end in {grid.dims}")
    return SpectralField(grid, rfftn(values))


def inverse(sf: SpectralField) -> np.ndarray:
    """Inverse transform back to collocation values."""
    return irfftn(sf.modes, sf.grid.dims)


def gradient(sf: SpectralField) -> SpectralField:
    """Per-direction derivative; adds a leading axis of length 3."""
    return SpectralField(sf.grid, grad_modes(sf.grid, sf.modes))


def laplacian(sf: SpectralField) -> SpectralField:
    return SpectralField(sf.grid, -sf.grid.k_squared * sf.modes)


def divergence(sf: SpectralField) -> SpectralField:
    """Contract a leading length-3 axis with i*k."""
    if sf.modes.shape[0] != 3:
        raise DimensionError("divergence expects a leading axis of length 3")
    return SpectralField(sf.grid, div_modes(sf.grid, sf.modes))


def dealias(sf: SpectralField) -> SpectralField:
    return SpectralField(sf.grid, sf.modes * sf.grid.dealias_mask)


def leray_project(sf: SpectralField) -> SpectralField:
    """Remove the gradient part: u_hat -> u_hat - k (k.u_hat)/|k|^2."""
    if sf.modes.shape[0] != 3:
        raise DimensionError("leray_project expects a leading axis of length 3")
    return SpectralField(sf.grid, leray_modes(sf.grid, sf.modes))


def helmholtz_solve(sf: SpectralField, alpha: float) -> SpectralField:
    """Invert (I - alpha*Laplacian): per-mode division by 1 + alpha|k|^2."""
    if not (alpha > 0.0):
        raise ConfigurationError(f"helmholtz_solve needs alpha > 0, got {alpha}")
    return SpectralField(sf.grid, sf.modes / (1.0 + alpha * sf.grid.k_squared))


# -- raw-array helpers (hot path; the wrappers above stay thin) --------------

def grad_modes(grid: SpectralGrid, modes: np.ndarray) -> np.ndarray:
    k = grid.k_mesh.reshape((3,) + (1,) * (modes.ndim - 3) + grid.rshape)
    return 1j * k * modes[None]


def div_modes(grid: SpectralGrid, modes: np.ndarray) -> np.ndarray:
    k = grid.k_mesh.reshape((3,) + (1,) * (modes.ndim - 4) + grid.rshape)
    return (1j * k * modes).sum(axis=0)


def leray_modes(grid: SpectralGrid, modes: np.ndarray) -> np.ndarray:
    k = grid.k_mesh
    k2 = grid.k_squared.copy()
    k2[k2 == 0.0] = 1.0  # zero mode passes through untouched
    kdotu = (k * modes).sum(axis=0)
    return modes - k * (kdotu / k2)


# -- grid quadrature ----------------------------------------------------------

def quad_integral(grid: SpectralGrid, values: np.ndarray) -> float:
    """Rectangle-rule integral over the box (exact for resolved trig polys)."""
    return float(np.sum(values) * grid.cell_volume)


def l2_norm_sq(grid: SpectralGrid, values: np.ndarray) -> float:
    """Integral of the pointwise squared sum over all component axes."""
    flat = np.asarray(values).reshape((-1,) + grid.dims)
    return float(np.einsum("cijk,cijk->", flat, flat) * grid.cell_volume)


def spectral_divergence_rel(grid: SpectralGrid, uh: np.ndarray) -> float:
    """max_k |k.u_hat| / max_k |u_hat| (zero for the zero field)."""
    k = grid.k_mesh
    kdotu = np.abs((k * uh).sum(axis=0))
    umag = np.sqrt((np.abs(uh) ** 2).sum(axis=0))
    peak = float(umag.max())
    if peak == 0.0:
        return 0.0
    return float(kdotu.max()) / peak
