"""Periodic grid with precomputed wavenumber tables and the 2/3-rule mask.

Real fields are stored on the collocation grid; spectra use the real-FFT
layout, i.e. the last axis holds modes 0..N3/2 only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Uniform periodic grid plus spectral bookkeeping.

    ``freqs`` are the integer DFT frequencies per axis in standard FFT
    order (e.g. ``0,1,2,3,-4,-3,-2,-1`` for N=8); ``wavenumbers`` are the
    physical values ``2*pi*n/L``. The broadcastable meshes ``k_mesh``,
    ``k_squared``, ``dealias_mask`` and ``mode_weights`` live on the
    real-FFT layout ``(N1, N2, N3//2 + 1)``; the derivative mesh treats
    the self-paired Nyquist frequency as zero so spectral operators map
    real fields to real fields.
    """

    dims: tuple[int, int, int]
    box: tuple[float, float, float]
    freqs: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)
    wavenumbers: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)
    k_mesh: np.ndarray = field(repr=False)
    k_squared: np.ndarray = field(repr=False)
    dealias_mask: np.ndarray = field(repr=False)
    mode_weights: np.ndarray = field(repr=False)

    @property
    def rshape(self) -> tuple[int, int, int]:
        """Shape of a scalar spectrum in real-FFT layout."""
        n1, n2, n3 = self.dims
        return (n1, n2, n3 // 2 + 1)

    @property
    def n_points(self) -> int:
        n1, n2, n3 = self.dims
        return n1 * n2 * n3

    @property
    def volume(self) -> float:
        b1, b2, b3 = self.box
        return b1 * b2 * b3

    @property
    def cell_volume(self) -> float:
        return self.volume / self.n_points

    @property
    def spacings(self) -> tuple[float, float, float]:
        return tuple(b / n for b, n in zip(self.box, self.dims))

    @property
    def min_spacing(self) -> float:
        return min(self.spacings)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Meshgrid of collocation point coordinates (indexing='ij')."""
        axes = [np.arange(n) * (b / n) for n, b in zip(self.dims, self.box)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def same_as(self, other: "SpectralGrid") -> bool:
        return self.dims == other.dims and np.allclose(self.box, other.box, rtol=0.0, atol=0.0)


def make_grid(dims, box_length=(TWO_PI, TWO_PI, TWO_PI)) -> SpectralGrid:
    """Build a grid; dims must be even and >= 4, box lengths positive.

    The dealias mask keeps a mode iff |n_i| <= floor(N_i/3) on every axis.
    """
    dims = tuple(int(n) for n in dims)
    if np.isscalar(box_length):
        box_length = (box_length,) * 3
    box = tuple(float(b) for b in box_length)
    if len(dims) != 3 or len(box) != 3:
        raise ConfigurationError(f"expected 3 dims and 3 box lengths, got {dims} and {box}")
    for n in dims:
        if n < 4 or n % 2 != 0:
            raise ConfigurationError(f"grid dims must be even and >= 4, got {dims}")
    for b in box:
        if not (b > 0.0) or not np.isfinite(b):
            raise ConfigurationError(f"box lengths must be positive, got {box}")

    freqs = tuple(np.fft.fftfreq(n, d=1.0 / n).astype(np.int64) for n in dims)
    wavenumbers = tuple(TWO_PI * f / b for f, b in zip(freqs, box))

    n1, n2, n3 = dims
    # Derivative meshes zero the self-paired Nyquist frequency (odd-ball):
    # an imaginary multiplier there breaks the conjugate symmetry of real
    # fields. It is inside the dealias mask anyway.
    deriv = [w.copy() for w in wavenumbers]
    for axis, n in enumerate(dims):
        deriv[axis][n // 2] = 0.0
    # real-FFT layout: full frequencies on axes 0/1, nonnegative on axis 2
    f3r = np.arange(n3 // 2 + 1, dtype=np.int64)
    k1 = deriv[0][:, None, None]
    k2 = deriv[1][None, :, None]
    k3 = (TWO_PI * f3r / box[2])[None, None, :]
    k3[..., -1] = 0.0
    kx = np.broadcast_to(k1, (n1, n2, n3 // 2 + 1))
    ky = np.broadcast_to(k2, (n1, n2, n3 // 2 + 1))
    kz = np.broadcast_to(k3, (n1, n2, n3 // 2 + 1))
    k_mesh = np.stack([kx, ky, kz]).copy()
    k_squared = (k_mesh ** 2).sum(axis=0)

    cut = [n // 3 for n in dims]
    m1 = np.abs(freqs[0])[:, None, None] <= cut[0]
    m2 = np.abs(freqs[1])[None, :, None] <= cut[1]
    m3 = np.abs(f3r)[None, None, :] <= cut[2]
    dealias_mask = m1 & m2 & m3

    # Parseval weights for the half-spectrum: interior kz planes count twice
    weights = np.full((n1, n2, n3 // 2 + 1), 2.0)
    weights[..., 0] = 1.0
    weights[..., -1] = 1.0
    return SpectralGrid(
        dims=dims,
        box=box,
        freqs=freqs,
        wavenumbers=wavenumbers,
        k_mesh=k_mesh,
        k_squared=k_squared,
        dealias_mask=dealias_mask,
        mode_weights=weights,
    )
