"""Pointwise tensor algebra of the coupled system.

Tensors are (3, 3, ...) arrays; gradients of Q are (3, 3, 3, ...) with the
*leading* axis the derivative direction, and velocity gradients follow the
convention (grad u)[a, b] = d_b u_a. Everything here is pure pointwise
algebra, safe to map over grid points in any order.
"""

from __future__ import annotations

import numpy as np

from .params import ModelParams


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ab...,bc...->ac...", a, b)


def _add_to_diag(t: np.ndarray, s) -> np.ndarray:
    out = t.copy()
    for i in range(3):
        out[i, i] += s
    return out


def trace_contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tr(a b) pointwise: a_{ij} b_{ji}."""
    return np.einsum("ab...,ba...->...", a, b)


def frobenius(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a : b pointwise with the Frobenius pairing a_{ij} b_{ij}."""
    return np.einsum("ab...,ab...->...", a, b)


def strain_rotation(grad_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric / antisymmetric split; D + W reconstructs grad_u exactly."""
    t = np.swapaxes(grad_u, 0, 1)
    return 0.5 * (grad_u + t), 0.5 * (grad_u - t)


def bulk_term(q: np.ndarray, b: float, c: float) -> np.ndarray:
    """b [Q^2 - Tr(Q^2)/3 I] - c Q Tr(Q^2); symmetric traceless for traceless Q."""
    qsq = matmul(q, q)
    tr_qsq = np.einsum("aa...->...", qsq)
    out = b * _add_to_diag(qsq, -tr_qsq / 3.0)
    out -= c * q * tr_qsq
    return out


def molecular_field(q: np.ndarray, lap_q: np.ndarray, params: ModelParams) -> np.ndarray:
    """H = L lap(Q) - a Q + b[Q^2 - Tr(Q^2)/3 I] - c Q Tr(Q^2)."""
    return params.L * lap_q - params.a * q + bulk_term(q, params.b, params.c)


def advection_tensor(grad_u: np.ndarray, q: np.ndarray, xi: float) -> np.ndarray:
    """Flow-alignment source: xi-weighted stretching plus corotation.

    S = xi D (Q + I/3) + xi (Q + I/3) D - 2 xi (Q + I/3) Tr(Q grad_u)
        + W Q - Q W.
    """
    d, w = strain_rotation(grad_u)
    out = matmul(w, q) - matmul(q, w)
    if xi != 0.0:
        q3 = _add_to_diag(q, 1.0 / 3.0)
        out += xi * (matmul(d, q3) + matmul(q3, d))
        out -= 2.0 * xi * q3 * trace_contract(q, grad_u)
    return out


def distortion_stress(grad_q: np.ndarray) -> np.ndarray:
    """(grad Q . grad Q)_{ab} = sum_{gd} d_a Q_{gd} d_b Q_{gd}; a Gram matrix."""
    return np.einsum("agd...,bgd...->ab...", grad_q, grad_q)


def stress_tau_from_parts(
    q: np.ndarray, h: np.ndarray, distortion: np.ndarray, params: ModelParams
) -> np.ndarray:
    """stress_tau with the distortion Gram matrix already in hand."""
    out = -params.L * distortion
    xi = params.xi
    if xi != 0.0:
        q3 = _add_to_diag(q, 1.0 / 3.0)
        out -= xi * (matmul(q3, h) + matmul(h, q3))
        out += 2.0 * xi * q3 * trace_contract(q, h)
    return out


def stress_tau(q: np.ndarray, h: np.ndarray, grad_q: np.ndarray, params: ModelParams) -> np.ndarray:
    """Symmetric stress: xi exchange terms minus the elastic distortion part."""
    return stress_tau_from_parts(q, h, distortion_stress(grad_q), params)


def stress_sigma(q: np.ndarray, lap_q: np.ndarray) -> np.ndarray:
    """Antisymmetric commutator Q lap(Q) - lap(Q) Q (elastic factor applied
    by the caller)."""
    return matmul(q, lap_q) - matmul(lap_q, q)


def free_energy_density(q: np.ndarray, grad_q: np.ndarray, params: ModelParams) -> np.ndarray:
    """L/2 |grad Q|^2 + a/2 Tr(Q^2) - b/3 Tr(Q^3) + c/4 (Tr Q^2)^2."""
    qsq = matmul(q, q)
    tr2 = np.einsum("aa...->...", qsq)
    tr3 = trace_contract(qsq, q)
    grad_sq = np.einsum("dab...,dab...->...", grad_q, grad_q)
    return (
        0.5 * params.L * grad_sq
        + 0.5 * params.a * tr2
        - params.b / 3.0 * tr3
        + 0.25 * params.c * tr2 ** 2
    )
