"""Assembly of the coupled right-hand side.

Differentiation is spectral; every nonlinear product is formed pointwise
in physical space from band-limited ingredients and dealiased once on the
way back to mode space. Pressure never materializes: the velocity tendency
is Leray-projected.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import tensors
from .errors import NumericalStateError
from .fields import SYM_INDICES, SYM_WEIGHTS, StateSnapshot, full_to_sym6, sym6_to_full
from .grid import SpectralGrid
from .params import ModelParams
from .spectral import irfftn, leray_modes, rfftn


class DerivedFields:
    """Spectral state plus the physical-space derivatives the kernels need.

    The Q gradient is kept in six-component storage (``gq6``, leading axis
    the derivative direction); the full (3, 3, 3, ...) view is built on
    first use only.
    """

    def __init__(self, grid: SpectralGrid, q6h, uh, q6, gq6, lap6, u, grad_u):
        self.grid = grid
        self.q6h = q6h          # (6, *rshape)
        self.uh = uh            # (3, *rshape)
        self.q6 = q6            # (6, *dims)
        self.gq6 = gq6          # (3, 6, *dims)
        self.lap6 = lap6        # (6, *dims)
        self.u = u              # (3, *dims)
        self.grad_u = grad_u    # (3, 3, *dims), (grad u)[a, b] = d_b u_a

    @cached_property
    def q(self) -> np.ndarray:
        return sym6_to_full(self.q6)

    @cached_property
    def lap_q(self) -> np.ndarray:
        return sym6_to_full(self.lap6)

    @cached_property
    def grad_q(self) -> np.ndarray:
        out = np.empty((3, 3, 3) + self.grid.dims)
        for m, (i, j) in enumerate(SYM_INDICES):
            out[:, i, j] = self.gq6[:, m]
            if i != j:
                out[:, j, i] = self.gq6[:, m]
        return out


def derive_fields(state: StateSnapshot) -> DerivedFields:
    grid = state.grid
    q6 = state.Q.components
    u = state.u.components
    q6h = rfftn(q6)
    uh = rfftn(u)

    k = grid.k_mesh
    gq6 = irfftn(1j * k[:, None] * q6h[None], grid.dims)
    lap6 = irfftn(-grid.k_squared * q6h, grid.dims)
    gu = irfftn(1j * k[:, None] * uh[None], grid.dims)  # [d, c] = d_d u_c

    return DerivedFields(
        grid=grid, q6h=q6h, uh=uh, q6=q6, gq6=gq6, lap6=lap6,
        u=u, grad_u=np.ascontiguousarray(np.swapaxes(gu, 0, 1)),
    )


def nonlinear_modes(params: ModelParams, df: DerivedFields) -> tuple[np.ndarray, np.ndarray]:
    """Dealiased spectral tendencies of all non-diffusive, non-damping terms.

    Q side: -u.grad Q + S(grad u, Q) + Gamma * M[Q].
    u side: P[ -u.grad u + div(tau + L sigma) ].
    The stiff parts (Gamma L lap Q, -a Gamma Q, mu lap u) are left to the
    caller so the same assembly serves explicit and semi-implicit steps.
    """
    grid = df.grid
    p = params

    adv_q6 = np.einsum("d...,dm...->m...", df.u, df.gq6)
    s_term = tensors.advection_tensor(df.grad_u, df.q, p.xi)
    m_term = tensors.bulk_term(df.q, p.b, p.c)
    nq = -adv_q6 + full_to_sym6(s_term + p.Gamma * m_term)
    nqh = rfftn(nq) * grid.dealias_mask

    h = p.L * df.lap_q - p.a * df.q + m_term
    distortion = np.einsum("m,am...,bm...->ab...", SYM_WEIGHTS, df.gq6, df.gq6)
    stress = tensors.stress_tau_from_parts(df.q, h, distortion, p)
    stress += p.L * tensors.stress_sigma(df.q, df.lap_q)
    adv_u = np.einsum("b...,ab...->a...", df.u, df.grad_u)

    div_stress_h = np.einsum("b...,ab...->a...", 1j * grid.k_mesh, rfftn(stress))
    nuh = leray_modes(grid, (div_stress_h - rfftn(adv_u)) * grid.dealias_mask)
    return nqh, nuh


def rhs_modes(state: StateSnapshot, df: DerivedFields | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Full spectral tendencies (d/dt Q_hat, d/dt u_hat)."""
    if df is None:
        df = derive_fields(state)
    p = state.params
    grid = state.grid
    nqh, nuh = nonlinear_modes(p, df)
    dqh = nqh + p.Gamma * (-p.a - p.L * grid.k_squared) * df.q6h
    duh = nuh - p.mu * grid.k_squared * df.uh
    return dqh, duh


def rhs_full(state: StateSnapshot) -> tuple[np.ndarray, np.ndarray]:
    """Physical-space rates (dQ/dt as (6, ...), du/dt as (3, ...)).

    The rest state is an exact fixed point; non-finite output raises with
    the name of the first offending term.
    """
    df = derive_fields(state)
    dqh, duh = rhs_modes(state, df)
    dq = irfftn(dqh, state.grid.dims)
    du = irfftn(duh, state.grid.dims)
    if not (np.isfinite(dq).all() and np.isfinite(du).all()):
        raise NumericalStateError(
            "non-finite tendency", term=_first_bad_term(state.params, df)
        )
    return dq, du


def _first_bad_term(params: ModelParams, df: DerivedFields) -> str:
    p = params
    m_term = tensors.bulk_term(df.q, p.b, p.c)
    h = p.L * df.lap_q - p.a * df.q + m_term
    named = [
        ("grad u", df.grad_u),
        ("grad Q", df.gq6),
        ("lap Q", df.lap_q),
        ("u.grad Q", np.einsum("d...,dm...->m...", df.u, df.gq6)),
        ("u.grad u", np.einsum("b...,ab...->a...", df.u, df.grad_u)),
        ("S(grad u, Q)", tensors.advection_tensor(df.grad_u, df.q, p.xi)),
        ("M[Q]", m_term),
        ("H[Q]", h),
        ("tau", tensors.stress_tau(df.q, h, df.grad_q, p)),
        ("sigma", tensors.stress_sigma(df.q, df.lap_q)),
    ]
    for name, value in named:
        if not np.isfinite(value).all():
            return name
    return "unidentified"


def max_velocity(state: StateSnapshot) -> float:
    return float(state.u.magnitude().max())
