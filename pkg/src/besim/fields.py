"""Field containers and initial-condition builders.

The order parameter is stored as six scalar fields (upper triangle, order
xx, xy, xz, yy, yz, zz) so symmetry is structural; the trace is enforced
numerically by constraint projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import spectral
from .errors import DimensionError, InputError, NumericalStateError
from .grid import SpectralGrid
from .params import ModelParams

# upper-triangle storage order and the matching Frobenius multiplicities
SYM_INDICES = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
SYM_WEIGHTS = np.array([1.0, 2.0, 2.0, 1.0, 2.0, 1.0])
_DIAG = (0, 3, 5)


def sym6_to_full(c: np.ndarray) -> np.ndarray:
    """Expand (6, ...) upper-triangle storage to a full (3, 3, ...) tensor."""
    out = np.empty((3, 3) + c.shape[1:], dtype=c.dtype)
    for m, (i, j) in enumerate(SYM_INDICES):
        out[i, j] = c[m]
        if i != j:
            out[j, i] = c[m]
    return out


def full_to_sym6(t: np.ndarray) -> np.ndarray:
    """Collapse a symmetric (3, 3, ...) tensor to upper-triangle storage."""
    return np.stack([t[i, j] for i, j in SYM_INDICES])


@dataclass(frozen=True, eq=False)
class QTensorField:
    grid: SpectralGrid
    components: np.ndarray  # (6, N1, N2, N3)

    def __post_init__(self):
        c = np.ascontiguousarray(self.components, dtype=np.float64)
        if c.shape != (6,) + self.grid.dims:
            raise DimensionError(f"Q components shape {c.shape}, expected {(6,) + self.grid.dims}")
        if not np.isfinite(c).all():
            raise NumericalStateError("non-finite values in Q-tensor field", term="Q")
        object.__setattr__(self, "components", c)

    def trace(self) -> np.ndarray:
        c = self.components
        return c[0] + c[3] + c[5]

    def max_abs_trace(self) -> float:
        return float(np.abs(self.trace()).max())

    def full(self) -> np.ndarray:
        return sym6_to_full(self.components)

    def frobenius_sq(self) -> np.ndarray:
        """Pointwise |Q|^2 = Tr(Q^2)."""
        return np.einsum("c,c...->...", SYM_WEIGHTS, self.components ** 2)


@dataclass(frozen=True, eq=False)
class VelocityField:
    grid: SpectralGrid
    components: np.ndarray  # (3, N1, N2, N3)

    def __post_init__(self):
        c = np.ascontiguousarray(self.components, dtype=np.float64)
        if c.shape != (3,) + self.grid.dims:
            raise DimensionError(f"u components shape {c.shape}, expected {(3,) + self.grid.dims}")
        if not np.isfinite(c).all():
            raise NumericalStateError("non-finite values in velocity field", term="u")
        object.__setattr__(self, "components", c)

    def magnitude(self) -> np.ndarray:
        return np.sqrt((self.components ** 2).sum(axis=0))

    def divergence_rel(self) -> float:
        uh = spectral.rfftn(self.components)
        return spectral.spectral_divergence_rel(self.grid, uh)


@dataclass(frozen=True, eq=False)
class StateSnapshot:
    time: float
    Q: QTensorField
    u: VelocityField
    params: ModelParams

    def __post_init__(self):
        if self.time < 0.0 or not np.isfinite(self.time):
            raise InputError(f"snapshot time must be nonnegative, got {self.time}")
        if not self.Q.grid.same_as(self.u.grid):
            raise DimensionError("Q and u live on different grids")

    @property
    def grid(self) -> SpectralGrid:
        return self.Q.grid


def zero_state(grid: SpectralGrid, params: ModelParams, time: float = 0.0) -> StateSnapshot:
    q = QTensorField(grid, np.zeros((6,) + grid.dims))
    u = VelocityField(grid, np.zeros((3,) + grid.dims))
    return StateSnapshot(time, q, u, params)


def uniaxial_q(grid: SpectralGrid, s, director) -> QTensorField:
    """Q = s (n x n - I/3) for a unit director field n.

    ``director`` may be a constant 3-vector or a (3, N1, N2, N3) field;
    ``s`` a scalar or a scalar field. The director must be normalized to
    within 1e-12 pointwise.
    """
    n = np.asarray(director, dtype=np.float64)
    if n.shape == (3,):
        n = np.broadcast_to(n[:, None, None, None], (3,) + grid.dims)
    if n.shape != (3,) + grid.dims:
        raise InputError(f"director shape {n.shape}, expected (3,) or {(3,) + grid.dims}")
    norm = np.sqrt((n ** 2).sum(axis=0))
    if np.abs(norm - 1.0).max() > 1e-12:
        raise InputError("director field is not unit-normalized (tolerance 1e-12)")
    s = np.asarray(s, dtype=np.float64)
    comps = np.empty((6,) + grid.dims)
    for m, (i, j) in enumerate(SYM_INDICES):
        outer = n[i] * n[j]
        if i == j:
            outer = outer - 1.0 / 3.0
        comps[m] = s * outer
    return QTensorField(grid, comps)


def random_solenoidal_velocity(
    grid: SpectralGrid, spectrum: float, amplitude: float, seed: int
) -> VelocityField:
    """Divergence-free random field with unit L2 norm scaled by amplitude.

    Spectral shaping multiplies white noise by (1 + |k|^2)^(-spectrum/2);
    the result is dealiased, Leray-projected and mean-free, so the L2
    energy equals amplitude^2 exactly and the same seed reproduces the
    field bit for bit.
    """
    if amplitude < 0.0:
        raise InputError(f"amplitude must be nonnegative, got {amplitude}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3,) + grid.dims)
    uh = spectral.rfftn(noise)
    uh *= (1.0 + grid.k_squared) ** (-0.5 * spectrum)
    uh *= grid.dealias_mask
    uh[:, 0, 0, 0] = 0.0
    uh = spectral.leray_modes(grid, uh)
    u = spectral.irfftn(uh, grid.dims)
    norm = np.sqrt(spectral.l2_norm_sq(grid, u))
    if norm > 0.0:
        u = u / norm
    return VelocityField(grid, amplitude * u)


def random_traceless_q(
    grid: SpectralGrid, spectrum: float, amplitude: float, seed: int
) -> QTensorField:
    """Random symmetric traceless dealiased Q with L2 norm = amplitude."""
    if amplitude < 0.0:
        raise InputError(f"amplitude must be nonnegative, got {amplitude}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((6,) + grid.dims)
    qh = spectral.rfftn(noise)
    qh *= (1.0 + grid.k_squared) ** (-0.5 * spectrum)
    qh *= grid.dealias_mask
    qh[:, 0, 0, 0] = 0.0
    q = spectral.irfftn(qh, grid.dims)
    trace = (q[0] + q[3] + q[5]) / 3.0
    for m in _DIAG:
        q[m] -= trace
    qsq = np.einsum("c,c...->...", SYM_WEIGHTS, q ** 2)
    norm = np.sqrt(float(qsq.sum()) * grid.cell_volume)
    if norm > 0.0:
        q = q / norm
    return QTensorField(grid, amplitude * q)


def project_constraints(state: StateSnapshot) -> StateSnapshot:
    """Remove the trace of Q pointwise and Leray-project u. Idempotent."""
    q = state.Q.components.copy()
    trace = (q[0] + q[3] + q[5]) / 3.0
    for m in _DIAG:
        q[m] -= trace
    uh = spectral.rfftn(state.u.components)
    uh = spectral.leray_modes(state.grid, uh)
    u = spectral.irfftn(uh, state.grid.dims)
    return replace(state, Q=QTensorField(state.grid, q), u=VelocityField(state.grid, u))


def dealias_state(state: StateSnapshot) -> StateSnapshot:
    """Band-limit both fields to the 2/3-rule mask."""
    grid = state.grid
    qh = spectral.rfftn(state.Q.components) * grid.dealias_mask
    uh = spectral.rfftn(state.u.components) * grid.dealias_mask
    q = spectral.irfftn(qh, grid.dims)
    u = spectral.irfftn(uh, grid.dims)
    return replace(state, Q=QTensorField(grid, q), u=VelocityField(grid, u))
