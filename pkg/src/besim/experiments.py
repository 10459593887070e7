"""Composite experiments: twin-run uniqueness probes, difference-functional
envelope fits, small-data decay sweeps, and the energy-equality convergence
study."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .diagnostics import (
    EnergyBreakdown,
    SerrinAccumulator,
    SerrinSpec,
    energy_breakdown,
    energy_equality_residual_series,
    lp_norm,
    sobolev_energies,
)
from .errors import ConfigurationError, DimensionError, InputError
from .diagnostics import _hs_norms
from .fields import SYM_WEIGHTS, QTensorField, StateSnapshot, VelocityField
from .grid import SpectralGrid, make_grid
from .spectral import irfftn, l2_norm_sq, rfftn
from .stepping import StepConfig, integrate

_SPATIAL = (-3, -2, -1)

_SCHEME_ORDER = {"imex": 1, "imex-picard": 2, "rk4": 4}


def difference_functional(a: StateSnapshot, b: StateSnapshot) -> float:
    """||v-u||^2 + ||R-Q||^2 + L ||grad(R-Q)||^2 for two same-grid states."""
    if not a.grid.same_as(b.grid):
        raise DimensionError("difference functional needs a shared grid")
    grid = a.grid
    omega = b.u.components - a.u.components
    g6 = b.Q.components - a.Q.components
    g6h = rfftn(g6)
    grad_g = irfftn(1j * grid.k_mesh[:, None] * g6h[None], grid.dims)
    w = SYM_WEIGHTS[:, None, None, None]
    g_l2 = l2_norm_sq(grid, g6 * np.sqrt(w))
    grad_l2 = float(np.einsum("c,dcijk,dcijk->", SYM_WEIGHTS, grad_g, grad_g) * grid.cell_volume)
    return l2_norm_sq(grid, omega) + g_l2 + a.params.L * grad_l2


def _hs_norm_of(state: StateSnapshot, s: int, what: str) -> float:
    """H^s norms of individual fields (not the weighted energy)."""
    grid = state.grid
    if what in ("q", "grad_q", "lap_q"):
        modes = rfftn(state.Q.components)
        n0, n1, n2 = _hs_norms(grid, modes, s, SYM_WEIGHTS)
        return math.sqrt({"q": n0, "grad_q": n1, "lap_q": n2}[what])
    modes = rfftn(state.u.components)
    n0, n1, _ = _hs_norms(grid, modes, s)
    return math.sqrt({"u": n0, "grad_u": n1}[what])


def gronwall_integrand(strong: StateSnapshot, other: StateSnapshot, p: float) -> float:
    """Sum of the eight norm groups controlling the difference functional.

    The exponents follow the uniqueness estimate with every unknown
    multiplicative constant set to one; defined for 2 < p < 6 only (the
    endpoint exponents degenerate).
    """
    if not (2.0 < p < 6.0):
        return math.nan
    e = 4.0 * p / (3.0 * p - 6.0)
    grid = strong.grid

    u_l2 = math.sqrt(l2_norm_sq(grid, strong.u.components))
    gu_lp = lp_norm(_grad_u_field(strong), p, grid)
    dq_lp = lp_norm(_lap_q_field(strong), p, grid)
    q_h1 = _hs_norm_of(strong, 1, "q")
    q_h2 = _hs_norm_of(strong, 2, "q")
    u_h1 = _hs_norm_of(strong, 1, "u")
    r_h1 = _hs_norm_of(other, 1, "q")
    r_h2 = _hs_norm_of(other, 2, "q")

    serrin_pair = u_l2 ** e * gu_lp ** e
    n1 = 1.0 + serrin_pair
    n2 = 1.0 + q_h2 ** 2 + serrin_pair + dq_lp ** e
    n3 = 1.0 + q_h2 ** 2 + gu_lp ** e + dq_lp ** e
    n4 = 1.0 + u_h1 ** 2 + q_h2 ** 2 + gu_lp ** e + dq_lp ** e
    n5 = 1.0 + q_h1 ** 4 + r_h1 ** 4
    mix = (10.0 * p - 12.0) / (6.0 - p)
    n6 = r_h1 ** mix * r_h2 ** 2 + q_h1 ** mix * q_h2 ** 2 + gu_lp ** e + dq_lp ** e
    n7 = sum(q_h1 ** (2 * l) + r_h1 ** (2 * l) for l in range(3)) * (
        1.0 + q_h2 ** 2 + r_h2 ** 2
    )
    n8 = (q_h1 ** 4 + r_h1 ** 4 + q_h1 ** 6 + r_h1 ** 6) * (q_h2 ** 2 + r_h2 ** 2)
    return n1 + n2 + n3 + n4 + n5 + n6 + n7 + n8


def _grad_u_field(state: StateSnapshot) -> np.ndarray:
    grid = state.grid
    uh = rfftn(state.u.components)
    return irfftn(1j * grid.k_mesh[:, None] * uh[None], grid.dims)


def _lap_q_field(state: StateSnapshot) -> np.ndarray:
    grid = state.grid
    qh = rfftn(state.Q.components)
    lap6 = irfftn(-grid.k_squared * qh, grid.dims)
    # Frobenius magnitude needs the off-diagonal multiplicity
    return lap6 * np.sqrt(SYM_WEIGHTS)[:, None, None, None]


@dataclass
class TwinRunReport:
    """Trajectory comparison between one initial state evolved two ways."""

    times: list[float] = field(default_factory=list)
    q_functional: list[float] = field(default_factory=list)
    gronwall_integrand: list[float] = field(default_factory=list)
    serrin_lap_q: SerrinAccumulator | None = None
    serrin_grad_u: SerrinAccumulator | None = None
    strong_label: str = "a"
    p: float = 4.0

    @property
    def q_max(self) -> float:
        return max(self.q_functional) if self.q_functional else 0.0


def _strong_index(cfg_a: StepConfig, cfg_b: StepConfig) -> int:
    """Designate the finer / higher-order run as the strong one."""
    key_a = (_SCHEME_ORDER[cfg_a.scheme], -cfg_a.dt)
    key_b = (_SCHEME_ORDER[cfg_b.scheme], -cfg_b.dt)
    return 0 if key_a >= key_b else 1


def twin_run(
    ic: StateSnapshot,
    cfg_a: StepConfig,
    cfg_b: StepConfig,
    t_end: float,
    p: float = 4.0,
    ic_b: StateSnapshot | None = None,
    n_samples: int = 32,
) -> TwinRunReport:
    """Evolve two trajectories from (optionally perturbed) shared data.

    Records the difference functional, the envelope integrand (for
    2 < p < 6), and the Serrin accumulators of the designated strong run.
    """
    SerrinSpec.from_p(p)  # range check, including the endpoints
    if ic_b is None:
        ic_b = ic
    if not ic.grid.same_as(ic_b.grid):
        raise ConfigurationError("twin runs need a shared grid")
    states = [ic, ic_b]
    cfgs = [cfg_a, cfg_b]
    strong = _strong_index(cfg_a, cfg_b)

    report = TwinRunReport(strong_label="ab"[strong], p=p)
    report.serrin_lap_q = SerrinAccumulator(SerrinSpec.from_p(p))
    report.serrin_grad_u = SerrinAccumulator(SerrinSpec.from_p(p))

    sample_times = np.linspace(ic.time, t_end, n_samples + 1)
    grid = ic.grid

    def record(t, first=False):
        sa, so = states[strong], states[1 - strong]
        report.times.append(float(t))
        report.q_functional.append(difference_functional(sa, so))
        report.gronwall_integrand.append(gronwall_integrand(sa, so, p))
        dq = lp_norm(_lap_q_field(sa), p, grid)
        gu = lp_norm(_grad_u_field(sa), p, grid)
        dt_acc = 0.0 if first else float(t - report.times[-2])
        report.serrin_lap_q = report.serrin_lap_q.update(dq, dt_acc)
        report.serrin_grad_u = report.serrin_grad_u.update(gu, dt_acc)

    record(ic.time, first=True)
    for ts in sample_times[1:]:
        for i in (0, 1):
            try:
                states[i] = integrate(states[i], cfgs[i], float(ts))
            except Exception as exc:
                label = f"[run {'ab'[i]}] "
                exc.args = (label + str(exc.args[0] if exc.args else exc),) + tuple(exc.args[1:])
                raise
        record(ts)
    return report


@dataclass(frozen=True)
class GronwallCheck:
    fitted_c: float
    degenerate: bool
    stable: bool | None = None
    refined_c: float | None = None


def gronwall_envelope_check(
    report: TwinRunReport, refined_report: TwinRunReport | None = None
) -> GronwallCheck:
    """Fit the smallest C with log Q(t) - log Q(0) <= C int_0^t A ds.

    Identical-IC reports (Q(0) = 0) degenerate to a diagnostic-only result.
    If a report from a halved perturbation is supplied, stability of the
    fit (within 20%) is evaluated as the pass criterion.
    """
    if len(report.times) < 3:
        raise InputError("need at least three samples for the envelope check")

    def fit(rep: TwinRunReport) -> float | None:
        q = np.asarray(rep.q_functional)
        if q[0] <= 0.0 or not np.all(np.isfinite(rep.gronwall_integrand)):
            return None
        t = np.asarray(rep.times)
        a = np.asarray(rep.gronwall_integrand)
        dt = np.diff(t)
        int_a = np.concatenate([[0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * dt)])
        with np.errstate(divide="ignore"):
            log_ratio = np.log(q[1:] / q[0])
        ratios = log_ratio / int_a[1:]
        ratios = ratios[np.isfinite(ratios)]
        if ratios.size == 0:
            return None
        return max(0.0, float(ratios.max()))

    c = fit(report)
    if c is None:
        return GronwallCheck(fitted_c=0.0, degenerate=True)
    if refined_report is None:
        return GronwallCheck(fitted_c=c, degenerate=False)
    c_ref = fit(refined_report)
    if c_ref is None:
        return GronwallCheck(fitted_c=c, degenerate=False)
    scale = max(abs(c), abs(c_ref), 1e-30)
    stable = abs(c - c_ref) / scale <= 0.2 or max(abs(c), abs(c_ref)) < 1e-12
    return GronwallCheck(fitted_c=c, degenerate=False, stable=stable, refined_c=c_ref)


@dataclass
class DecayReport:
    """E(t)/D(t) samples of one small-data run plus monotonicity bookkeeping."""

    amplitude: float
    times: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    monotone_violations: int = 0

    @property
    def initial_energy(self) -> float:
        return self.energy[0] if self.energy else 0.0


def small_data_decay(
    amplitudes,
    base_state: StateSnapshot,
    cfg: StepConfig,
    t_end: float,
    s: int = 2,
    tol: float = 1e-10,
) -> list[DecayReport]:
    """Integrate scaled copies of a base state and watch E(t) for growth.

    The base state is normalized so that each amplitude lambda yields
    E(0) = lambda^2 exactly; a violation is any step with a relative E
    increase above tol. Requires a > 0 (the decay regime hypothesis).
    """
    params = base_state.params
    if not params.a > 0.0:
        raise ConfigurationError(
            f"small-data decay requires a > 0 (damping hypothesis), got a = {params.a}"
        )
    if s < 2:
        raise ConfigurationError(f"small-data decay needs Sobolev index s >= 2, got {s}")
    base_e = sobolev_energies(base_state, s).E
    if base_e <= 0.0:
        raise ConfigurationError("base state has zero energy; nothing to scale")
    unit = 1.0 / math.sqrt(base_e)

    reports = []
    for amp in amplitudes:
        if amp < 0.0:
            raise ConfigurationError(f"amplitude must be nonnegative, got {amp}")
        lam = amp * unit
        state = replace(
            base_state,
            Q=QTensorField(base_state.grid, lam * base_state.Q.components),
            u=VelocityField(base_state.grid, lam * base_state.u.components),
        )
        report = DecayReport(amplitude=float(amp))

        def sample(st, rep=report):
            se = sobolev_energies(st, s)
            if rep.energy and se.E > rep.energy[-1] * (1.0 + tol):
                rep.monotone_violations += 1
            rep.times.append(st.time)
            rep.energy.append(se.E)
            rep.dissipation.append(se.D)

        sample(state)
        integrate(state, cfg, t_end, observers=[sample])
        reports.append(report)
    return reports


def largest_clean_amplitude(reports) -> float | None:
    clean = [r.amplitude for r in reports if r.monotone_violations == 0]
    return max(clean) if clean else None


@dataclass
class EqualityStudy:
    """Energy-equality residual magnitudes over (dt, grid) refinement."""

    dts: list[float]
    grids: list[tuple[int, int, int]]
    residuals: np.ndarray  # (len(dts), len(grids)) of |r(T)|
    dt_orders: list[float]
    grid_rel_change: list[float]


def _resample_state(state: StateSnapshot, grid: SpectralGrid) -> StateSnapshot:
    """Spectral re-embedding of a band-limited state onto another grid."""
    if grid.same_as(state.grid):
        return state

    def embed(values):
        src = state.grid
        fh = rfftn(values)
        out = np.zeros(values.shape[:-3] + grid.rshape, dtype=complex)
        half = [n // 2 for n in grid.dims]
        n3 = min(src.dims[2] // 2 + 1, grid.dims[2] // 2)  # skip target Nyquist
        for i, ki in enumerate(src.freqs[0]):
            if abs(int(ki)) >= half[0]:
                continue
            for j, kj in enumerate(src.freqs[1]):
                if abs(int(kj)) >= half[1]:
                    continue
                out[..., int(ki) % grid.dims[0], int(kj) % grid.dims[1], :n3] = fh[..., i, j, :n3]
        scale = grid.n_points / src.n_points
        return irfftn(out * scale, grid.dims)

    q = QTensorField(grid, embed(state.Q.components))
    u = VelocityField(grid, embed(state.u.components))
    return StateSnapshot(state.time, q, u, state.params)


def equality_convergence_study(
    ic: StateSnapshot,
    scheme: str,
    dts,
    grids,
    t_end: float,
) -> EqualityStudy:
    """Tabulate |r(T)| for each dt/grid pair and the observed dt orders.

    The trajectory is sampled every step so the trapezoid rule dominates
    the residual; halving dt should show order about two.
    """
    dts = [float(dt) for dt in dts]
    grids = [tuple(g) for g in grids]
    if not dts or not grids:
        raise ConfigurationError("both refinement ladders must be nonempty")
    if max(len(dts), len(grids)) < 3:
        raise ConfigurationError("at least one ladder needs >= 3 refinements")

    residuals = np.zeros((len(dts), len(grids)))
    for j, dims in enumerate(grids):
        grid = make_grid(dims, ic.grid.box)
        state0 = _resample_state(ic, grid)
        for i, dt in enumerate(dts):
            cfg = StepConfig(dt=dt, scheme=scheme)
            times = [state0.time]
            series = [energy_breakdown(state0)]

            def sample(st):
                times.append(st.time)
                series.append(energy_breakdown(st))

            integrate(state0, cfg, t_end, observers=[sample])
            r = energy_equality_residual_series(times, series)
            residuals[i, j] = abs(float(r[-1]))

    dt_orders = []
    for i in range(len(dts) - 1):
        ratio = dts[i] / dts[i + 1]
        col = residuals[i, :] / np.maximum(residuals[i + 1, :], 1e-300)
        dt_orders.append(float(np.log(col.mean()) / np.log(ratio)))
    grid_rel_change = []
    for j in range(len(grids) - 1):
        a, b = residuals[:, j], residuals[:, j + 1]
        grid_rel_change.append(float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
    return EqualityStudy(
        dts=dts,
        grids=grids,
        residuals=residuals,
        dt_orders=dt_orders,
        grid_rel_change=grid_rel_change,
    )
