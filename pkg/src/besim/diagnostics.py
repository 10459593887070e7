"""Scalar functionals: energies, dissipations, the energy-equality
residual, Serrin-type space-time norms, cancellation probes, and the
variational consistency of the molecular field with the free energy.

Pairings use the Frobenius product A:B = sum A_ij B_ij, which coincides
with the trace pairing whenever both factors are symmetric. Inner products
over the box use rectangle-rule quadrature on the collocation grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensors
from .dynamics import derive_fields
from .errors import ConfigurationError, InputError
from .fields import (
    SYM_INDICES,
    SYM_WEIGHTS,
    QTensorField,
    StateSnapshot,
    VelocityField,
    random_traceless_q,
    sym6_to_full,
)
from .grid import SpectralGrid
from .params import ModelParams
from .spectral import irfftn, l2_norm_sq, quad_integral, rfftn

_SPATIAL = (-3, -2, -1)


def _inner(grid: SpectralGrid, a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product of two tensor fields over the box."""
    return float(np.einsum("abijk,abijk->", a, b) * grid.cell_volume)


def _inner6(grid: SpectralGrid, a6: np.ndarray, b6: np.ndarray) -> float:
    """Frobenius inner product in six-component symmetric storage."""
    return float(np.einsum("c,cijk,cijk->", SYM_WEIGHTS, a6, b6) * grid.cell_volume)


def _norm(grid: SpectralGrid, a: np.ndarray) -> float:
    return math.sqrt(l2_norm_sq(grid, a))


def _norm6(grid: SpectralGrid, a6: np.ndarray) -> float:
    return math.sqrt(max(_inner6(grid, a6, a6), 0.0))


# -- energy breakdown --------------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    """Every term of the basic energy balance at one instant.

    kinetic/q_l2/q_grad enter the energy; diss_* are the (time-integrated)
    left-side dissipation terms; rhs_xi_terms and rhs_bulk_terms are the
    signed right-side integrands.
    """

    time: float
    kinetic: float
    q_l2: float
    q_grad: float
    diss_visc: float
    diss_q0: float
    diss_q1: float
    diss_q2: float
    rhs_xi_terms: float
    rhs_bulk_terms: float

    @property
    def energy(self) -> float:
        return self.kinetic + self.q_l2 + self.q_grad

    @property
    def dissipation(self) -> float:
        return self.diss_visc + self.diss_q0 + self.diss_q1 + self.diss_q2

    @property
    def rhs(self) -> float:
        return self.rhs_xi_terms + self.rhs_bulk_terms


def energy_breakdown(state: StateSnapshot) -> EnergyBreakdown:
    """Evaluate each energy-balance term by spectral quadrature."""
    grid, p = state.grid, state.params
    df = derive_fields(state)
    q, gu = df.q, df.grad_u

    kinetic = l2_norm_sq(grid, df.u)
    q_l2 = _inner6(grid, df.q6, df.q6)
    grad_q_sq = float(np.einsum("c,dcijk,dcijk->", SYM_WEIGHTS, df.gq6, df.gq6) * grid.cell_volume)
    grad_u_sq = float(np.einsum("abijk,abijk->", gu, gu) * grid.cell_volume)
    lap_q_sq = _inner6(grid, df.lap6, df.lap6)

    m = tensors.bulk_term(q, p.b, p.c)
    rhs_bulk = 2.0 * p.Gamma * (
        _inner(grid, m, q) - p.L * _inner(grid, m, df.lap_q)
    )

    rhs_xi = 0.0
    if p.xi != 0.0:
        tr_qgu = tensors.trace_contract(q, gu)
        q_qi3 = tensors.matmul(q, q) + q / 3.0
        qsq_mag = np.einsum("ab...,ab...->...", q, q)
        group_1a = _inner(grid, q_qi3, gu)
        group_1b = quad_integral(grid, tr_qgu * qsq_mag)
        m_qi3 = tensors.matmul(q, m) + m / 3.0
        group_m = _inner(grid, m_qi3, gu)
        group_mq = quad_integral(grid, tr_qgu * np.einsum("ab...,ab...->...", m, q))
        rhs_xi = (
            4.0 * (1.0 - p.a) * p.xi * (group_1a - group_1b)
            + 4.0 * p.xi * group_m
            - 4.0 * p.xi * group_mq
        )

    return EnergyBreakdown(
        time=state.time,
        kinetic=kinetic,
        q_l2=q_l2,
        q_grad=p.L * grad_q_sq,
        diss_visc=2.0 * p.mu * grad_u_sq,
        diss_q0=2.0 * p.a * p.Gamma * q_l2,
        diss_q1=2.0 * (p.a + 1.0) * p.Gamma * p.L * grad_q_sq,
        diss_q2=2.0 * p.Gamma * p.L ** 2 * lap_q_sq,
        rhs_xi_terms=rhs_xi,
        rhs_bulk_terms=rhs_bulk,
    )


def energy_equality_residual_series(times, series) -> np.ndarray:
    """Residual of the energy balance at every sample time.

    r(t) = [E(t) + int_0^t dissipation] - [E(0) + int_0^t rhs terms] with
    trapezoid time quadrature; r(0) = 0 by construction.
    """
    if len(series) < 2 or len(times) != len(series):
        raise InputError("need at least two matching (time, breakdown) samples")
    t = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(t) <= 0.0):
        raise InputError("sample times must be strictly increasing")
    energy = np.array([b.energy for b in series])
    diss = np.array([b.dissipation for b in series])
    rhs = np.array([b.rhs for b in series])
    dt = np.diff(t)

    def cumtrapz(f):
        out = np.zeros_like(f)
        out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * dt)
        return out

    return energy + cumtrapz(diss) - energy[0] - cumtrapz(rhs)


def energy_equality_residual(times, series, t=None) -> float:
    """Residual at time t (default: the final sample)."""
    r = energy_equality_residual_series(times, series)
    if t is None:
        return float(r[-1])
    idx = int(np.argmin(np.abs(np.asarray(times) - t)))
    if abs(times[idx] - t) > 1e-9 * max(1.0, abs(t)):
        raise InputError(f"t={t} is not a sample time")
    return float(r[idx])


# -- Serrin norms --------------------------------------------------------------

@dataclass(frozen=True)
class SerrinSpec:
    """Space-time exponent pair on the uniqueness-criterion line
    2/q + 3/p = 3/2 for 2 <= p <= 6 (p = 2 maps to q = infinity)."""

    p: float
    q: float

    @staticmethod
    def from_p(p: float) -> "SerrinSpec":
        if not (2.0 <= p <= 6.0):
            raise ConfigurationError(
                f"p={p} outside [2, 6]; the uniqueness criterion restricts 2 <= p <= 6"
            )
        if p == 2.0:
            return SerrinSpec(p=2.0, q=math.inf)
        return SerrinSpec(p=float(p), q=4.0 * p / (3.0 * p - 6.0))


@dataclass(frozen=True)
class SerrinAccumulator:
    """Running L^q-in-time accumulation of L^p-in-space samples."""

    spec: SerrinSpec
    time: float = 0.0
    integral: float = 0.0
    sup: float = 0.0
    samples: tuple = ()

    def update(self, sample: float, dt: float) -> "SerrinAccumulator":
        if sample < 0.0:
            raise InputError(f"norm sample must be nonnegative, got {sample}")
        if dt < 0.0:
            raise InputError(f"dt must be nonnegative, got {dt}")
        t_new = self.time + dt
        if math.isinf(self.spec.q):
            return SerrinAccumulator(
                self.spec, t_new, 0.0, max(self.sup, sample),
                self.samples + ((t_new, sample),),
            )
        return SerrinAccumulator(
            self.spec, t_new, self.integral + dt * sample ** self.spec.q, self.sup,
            self.samples + ((t_new, sample),),
        )

    @property
    def norm(self) -> float:
        if math.isinf(self.spec.q):
            return self.sup
        return self.integral ** (1.0 / self.spec.q)


def serrin_norm(acc: SerrinAccumulator, sample: float, dt: float) -> SerrinAccumulator:
    """Fold one time sample into the accumulator; returns the new value."""
    return acc.update(sample, dt)


def lp_norm(fld, p, grid: SpectralGrid | None = None) -> float:
    """L^p norm over the box; tensor magnitude is the Frobenius norm."""
    if isinstance(fld, QTensorField):
        grid, mag_sq = fld.grid, fld.frobenius_sq()
    elif isinstance(fld, VelocityField):
        grid, mag_sq = fld.grid, (fld.components ** 2).sum(axis=0)
    else:
        arr = np.asarray(fld, dtype=np.float64)
        if grid is None:
            raise InputError("lp_norm on a bare array needs the grid")
        flat = arr.reshape((-1,) + grid.dims)
        mag_sq = (flat ** 2).sum(axis=0)
    if p == math.inf:
        return float(np.sqrt(mag_sq.max()))
    if p < 1.0:
        raise InputError(f"p must be >= 1 or inf, got {p}")
    return float((np.sum(mag_sq ** (p / 2.0)) * grid.cell_volume) ** (1.0 / p))


# -- Sobolev energy/dissipation functionals -----------------------------------

@dataclass(frozen=True)
class SobolevEnergies:
    s: int
    E: float
    D: float


def _hs_norms(grid: SpectralGrid, modes: np.ndarray, s: int, comp_weights=None):
    """(|f|_{H^s}^2, |grad f|_{H^s}^2, |lap f|_{H^s}^2) from one spectrum."""
    mag = modes.real ** 2 + modes.imag ** 2
    if comp_weights is not None:
        mag = np.einsum("c,c...->...", comp_weights, mag)
    else:
        mag = mag.sum(axis=0)
    mag = mag * grid.mode_weights
    bessel = (1.0 + grid.k_squared) ** s
    scale = grid.volume / grid.n_points ** 2
    base = bessel * mag
    return (
        float(base.sum()) * scale,
        float((grid.k_squared * base).sum()) * scale,
        float((grid.k_squared ** 2 * base).sum()) * scale,
    )


def sobolev_energies(state: StateSnapshot, s: int) -> SobolevEnergies:
    """Higher-order energy E and dissipation D with Bessel weights
    (1 + |k|^2)^s, the exact H^s realization on the torus."""
    if s < 0 or int(s) != s:
        raise InputError(f"Sobolev index must be a nonnegative integer, got {s}")
    grid, p = state.grid, state.params
    q6h = rfftn(state.Q.components)
    uh = rfftn(state.u.components)
    q_hs, gq_hs, lapq_hs = _hs_norms(grid, q6h, int(s), SYM_WEIGHTS)
    u_hs, gu_hs, _ = _hs_norms(grid, uh, int(s))
    energy = u_hs + p.a * q_hs + p.L * gq_hs
    dissipation = (
        p.mu * gu_hs
        + p.a ** 2 * p.Gamma * q_hs
        + 2.0 * p.a * p.Gamma * p.L * gq_hs
        + p.Gamma * p.L ** 2 * lapq_hs
    )
    return SobolevEnergies(s=int(s), E=energy, D=dissipation)


# -- cancellation identities ---------------------------------------------------

@dataclass(frozen=True)
class CancellationResiduals:
    """Normalized residuals of the six transport/exchange identities."""

    advection: float
    corotation: float
    distortion_transport: float
    commutator_exchange: float
    alignment_exchange: float
    trace_pairing: float

    def as_dict(self) -> dict[str, float]:
        return {
            "advection": self.advection,
            "corotation": self.corotation,
            "distortion_transport": self.distortion_transport,
            "commutator_exchange": self.commutator_exchange,
            "alignment_exchange": self.alignment_exchange,
            "trace_pairing": self.trace_pairing,
        }

    def max(self) -> float:
        return max(self.as_dict().values())


def _rel(value: float, scale: float) -> float:
    if scale == 0.0:
        return 0.0
    return abs(value) / scale


def cancellation_probe(state: StateSnapshot, seed: int = 0) -> CancellationResiduals:
    """Evaluate the six inner-product identities on the discrete fields.

    Identities involving a second tensor are probed with both G = Q and an
    independent random symmetric traceless G; the reported residual is the
    worse of the two, normalized by the factor magnitudes.
    """
    grid = state.grid
    df = derive_fields(state)
    q, lap_q, gu, u = df.q, df.lap_q, df.grad_u, df.u
    d, w = tensors.strain_rotation(gu)

    u_adv_u = np.einsum("b...,ab...->a...", u, gu)
    val_1a = float(np.einsum("aijk,aijk->", u_adv_u, u) * grid.cell_volume)
    u_adv_q = np.einsum("d...,dab...->ab...", u, df.grad_q)
    val_1b = _inner(grid, u_adv_q, q)
    advection = max(
        _rel(val_1a, _norm(grid, u_adv_u) * _norm(grid, u)),
        _rel(val_1b, _norm(grid, u_adv_q) * _norm(grid, q)),
    )

    qw = tensors.matmul(q, w) - tensors.matmul(w, q)
    corotation = _rel(_inner(grid, qw, q), _norm(grid, qw) * _norm(grid, q))

    dist = tensors.distortion_stress(df.grad_q)
    dist_h = rfftn(dist)
    div_dist = irfftn(np.einsum("b...,ab...->a...", 1j * grid.k_mesh, dist_h), grid.dims)
    lhs3 = _inner(grid, u_adv_q, lap_q)
    rhs3 = float(np.einsum("aijk,aijk->", div_dist, u) * grid.cell_volume)
    distortion_transport = _rel(
        lhs3 - rhs3,
        _norm(grid, u_adv_q) * _norm(grid, lap_q) + _norm(grid, div_dist) * _norm(grid, u),
    )

    g_rand = random_traceless_q(grid, spectrum=2.0, amplitude=1.0, seed=seed).full()
    commutator_exchange = 0.0
    alignment_exchange = 0.0
    for g in (q, g_rand):
        gw = tensors.matmul(g, w) - tensors.matmul(w, g)
        glap = tensors.matmul(g, lap_q) - tensors.matmul(lap_q, g)
        val4 = _inner(grid, gw, lap_q) - _inner(grid, glap, gu)
        scale4 = _norm(grid, gw) * _norm(grid, lap_q) + _norm(grid, glap) * _norm(grid, gu)
        commutator_exchange = max(commutator_exchange, _rel(val4, scale4))

        dq_sym = tensors.matmul(d, q) + tensors.matmul(q, d)
        gq_sym = tensors.matmul(g, q) + tensors.matmul(q, g)
        val5 = _inner(grid, dq_sym, g) - _inner(grid, gq_sym, gu)
        scale5 = _norm(grid, dq_sym) * _norm(grid, g) + _norm(grid, gq_sym) * _norm(grid, gu)
        alignment_exchange = max(alignment_exchange, _rel(val5, scale5))

    val6 = _inner(grid, q, gu) - _inner(grid, d, q)
    trace_pairing = _rel(val6, _norm(grid, q) * _norm(grid, gu) + _norm(grid, d) * _norm(grid, q))

    return CancellationResiduals(
        advection=advection,
        corotation=corotation,
        distortion_transport=distortion_transport,
        commutator_exchange=commutator_exchange,
        alignment_exchange=alignment_exchange,
        trace_pairing=trace_pairing,
    )


# -- variational consistency ----------------------------------------------------

def total_free_energy(q_field: QTensorField, params: ModelParams) -> float:
    """Free energy of Q: elastic gradient term plus the bulk potential."""
    grid = q_field.grid
    q6h = rfftn(q_field.components)
    gq6 = irfftn(1j * grid.k_mesh[:, None] * q6h[None], grid.dims)
    grad_q = np.empty((3, 3, 3) + grid.dims)
    for m, (i, j) in enumerate(SYM_INDICES):
        grad_q[:, i, j] = gq6[:, m]
        if i != j:
            grad_q[:, j, i] = gq6[:, m]
    density = tensors.free_energy_density(q_field.full(), grad_q, params)
    return quad_integral(grid, density)


def molecular_field_of(q_field: QTensorField, params: ModelParams) -> np.ndarray:
    """H[Q] as a full (3, 3, ...) tensor field, derivatives spectral."""
    grid = q_field.grid
    q6h = rfftn(q_field.components)
    lap6 = irfftn(-grid.k_squared * q6h, grid.dims)
    return tensors.molecular_field(q_field.full(), sym6_to_full(lap6), params)


def variational_consistency(
    q_field: QTensorField,
    params: ModelParams,
    eps: float,
    directions: int = 20,
    seed: int = 0,
) -> float:
    """Central-difference check that H is minus the constrained free-energy
    gradient: compares (F(Q+eV) - F(Q-eV)) / 2e with -<H[Q] : V> over random
    unit traceless directions V and returns the worst mismatch relative to
    the Cauchy-Schwarz magnitude |H| |V| of the pairing (stable even when a
    direction happens to be nearly gradient-orthogonal)."""
    if eps <= 0.0:
        raise InputError(f"perturbation amplitude must be positive, got {eps}")
    grid = q_field.grid
    h = molecular_field_of(q_field, params)
    h_norm = _norm(grid, h)
    # directions live on the scale of Q itself so the quadratic truncation
    # term stays clear of the floating-point floor of the F differences
    v_amp = max(1.0, math.sqrt(_inner6(grid, q_field.components, q_field.components)))
    worst = 0.0
    for j in range(directions):
        v = random_traceless_q(grid, spectrum=2.0, amplitude=v_amp, seed=seed + j)
        plus = QTensorField(grid, q_field.components + eps * v.components)
        minus = QTensorField(grid, q_field.components - eps * v.components)
        num = (total_free_energy(plus, params) - total_free_energy(minus, params)) / (2.0 * eps)
        pair = -_inner(grid, h, v.full())
        denom = max(abs(num), abs(pair), h_norm, 1e-30)
        worst = max(worst, abs(num - pair) / denom)
    return worst


# -- time-series container -------------------------------------------------------

@dataclass
class TimeSeriesReport:
    """Per-sample scalar diagnostics, one named column per quantity."""

    columns: list[str]
    descriptions: dict[str, str] = field(default_factory=dict)
    rows: list[list[float]] = field(default_factory=list)

    def add_row(self, values: dict[str, float]) -> None:
        missing = [c for c in self.columns if c not in values]
        extra = [c for c in values if c not in self.columns]
        if missing or extra:
            raise InputError(f"row mismatch: missing {missing}, unexpected {extra}")
        self.rows.append([float(values[c]) for c in self.columns])

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])

    def __len__(self) -> int:
        return len(self.rows)
