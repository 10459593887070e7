"""Experiment orchestration and deterministic CSV/JSON/checkpoint output.

Every float printed to CSV uses 17 significant digits, so identical runs
produce byte-identical files and `besim report` can rebuild the summary
losslessly from the CSV alone.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import replace

import numpy as np

from . import experiments
from .checkpoint import read_checkpoint, write_checkpoint
from .config import RunConfig
from .diagnostics import (
    SerrinAccumulator,
    SerrinSpec,
    TimeSeriesReport,
    cancellation_probe,
    energy_breakdown,
    energy_equality_residual_series,
    lp_norm,
)
from .errors import BesimError, ConfigurationError
from .fields import (
    StateSnapshot,
    VelocityField,
    QTensorField,
    dealias_state,
    project_constraints,
    random_solenoidal_velocity,
    random_traceless_q,
    uniaxial_q,
)
from .grid import make_grid
from .params import ModelParams
from .stepping import StepConfig, integrate

_FMT = "{:.17g}"


def default_dt(state: StateSnapshot, cfl_limit: float) -> float:
    """Documented default: 0.01 capped by half the CFL bound of the IC."""
    vmax = float(state.u.magnitude().max())
    if vmax == 0.0:
        return 1e-2
    return min(1e-2, 0.5 * cfl_limit * state.grid.min_spacing / vmax)


def model_params(config: RunConfig) -> ModelParams:
    return ModelParams(
        a=config.a, b=config.b, c=config.c, L=config.L,
        Gamma=config.Gamma, mu=config.mu, xi=config.xi,
    )


def build_initial_state(config: RunConfig, resume: str | None = None) -> StateSnapshot:
    """Construct (or load) the initial state, band-limited and projected."""
    if resume:
        return read_checkpoint(resume)
    ic = config.ic
    if ic.kind == "checkpoint":
        return read_checkpoint(ic.path)
    grid = make_grid(config.dims, config.box)
    params = model_params(config)
    if ic.kind == "uniaxial":
        if ic.director == "twist":
            x1 = grid.coordinates()[0]
            director = np.stack([np.cos(x1), np.sin(x1), np.zeros_like(x1)])
        else:
            axis = {"x": 0, "y": 1, "z": 2}[ic.director]
            vec = np.zeros(3)
            vec[axis] = 1.0
            director = vec
        q = uniaxial_q(grid, ic.s, director)
        u = random_solenoidal_velocity(grid, ic.spectrum, ic.u_amplitude, ic.seed)
    else:
        q = random_traceless_q(grid, ic.spectrum, ic.q_amplitude, ic.seed)
        u = random_solenoidal_velocity(grid, ic.spectrum, ic.u_amplitude, ic.seed + 1)
    state = StateSnapshot(0.0, q, u, params)
    return project_constraints(dealias_state(state))


def step_config(config: RunConfig, state: StateSnapshot) -> StepConfig:
    dt = config.dt if config.dt is not None else default_dt(state, config.cfl_limit)
    return StepConfig(
        dt=dt,
        scheme=config.scheme,
        picard_tol=config.picard_tol,
        picard_max_iter=config.picard_max_iter,
        cfl_limit=config.cfl_limit,
    )


def _fmt(value: float) -> str:
    return _FMT.format(float(value))


def write_csv(path, report: TimeSeriesReport) -> None:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_schema(path, report: TimeSeriesReport, meta: dict) -> None:
    payload = {
        "meta": meta,
        "columns": [
            {"name": c, "description": report.descriptions.get(c, "")}
            for c in report.columns
        ],
    }
    if len(payload["columns"]) != len(report.columns):
        raise BesimError("schema column count mismatch")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path) -> TimeSeriesReport:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    columns = lines[0].split(",")
    report = TimeSeriesReport(columns=columns)
    for ln in lines[1:]:
        report.rows.append([float(v) for v in ln.split(",")])
    return report


def _q_eig_range(state: StateSnapshot) -> tuple[float, float]:
    m = np.moveaxis(state.Q.full(), (0, 1), (-2, -1))
    ev = np.linalg.eigvalsh(m)
    return float(ev.min()), float(ev.max())


# -- single run -----------------------------------------------------------------

def _single_columns(serrin_p, probe: bool) -> tuple[list[str], dict[str, str]]:
    cols = [
        "t", "kinetic", "q_l2", "q_grad",
        "diss_visc", "diss_q0", "diss_q1", "diss_q2",
        "rhs_xi_terms", "rhs_bulk_terms", "energy_residual",
        "trq_max", "div_rel", "q_eig_min", "q_eig_max",
    ]
    desc = {
        "t": "sample time",
        "kinetic": "kinetic energy |u|_L2^2",
        "q_l2": "|Q|_L2^2",
        "q_grad": "L |grad Q|_L2^2",
        "diss_visc": "2 mu |grad u|_L2^2",
        "diss_q0": "2 a Gamma |Q|_L2^2",
        "diss_q1": "2 (a+1) Gamma L |grad Q|_L2^2",
        "diss_q2": "2 Gamma L^2 |lap Q|_L2^2",
        "rhs_xi_terms": "signed xi-coupling terms of the energy balance",
        "rhs_bulk_terms": "signed bulk-potential terms of the energy balance",
        "energy_residual": "energy-balance residual r(t), trapezoid in time",
        "trq_max": "max |Tr Q| over the grid",
        "div_rel": "max_k |k.u_hat| / max_k |u_hat|",
        "q_eig_min": "smallest Q eigenvalue over the grid",
        "q_eig_max": "largest Q eigenvalue over the grid",
    }
    if probe:
        cols.append("identity_max")
        desc["identity_max"] = "worst normalized cancellation-identity residual"
    for p in serrin_p:
        cols.append(f"serrin_dq_p{p:g}")
        desc[cols[-1]] = f"running Serrin norm of lap Q at p={p:g}"
        cols.append(f"serrin_du_p{p:g}")
        desc[cols[-1]] = f"running Serrin norm of grad u at p={p:g}"
    return cols, desc


def _run_single(config: RunConfig, out: str, resume: str | None):
    state = build_initial_state(config, resume)
    cfg = step_config(config, state)
    grid = state.grid
    columns, descriptions = _single_columns(config.serrin_p, config.probe_identities)
    report = TimeSeriesReport(columns=columns, descriptions=descriptions)

    serrin_dq = {p: SerrinAccumulator(SerrinSpec.from_p(p)) for p in config.serrin_p}
    serrin_du = {p: SerrinAccumulator(SerrinSpec.from_p(p)) for p in config.serrin_p}
    times: list[float] = []
    breakdowns = []
    partials: list[dict[str, float]] = []

    def sample(st: StateSnapshot):
        nonlocal serrin_dq, serrin_du
        bd = energy_breakdown(st)
        times.append(st.time)
        breakdowns.append(bd)
        dt_acc = 0.0 if len(times) == 1 else times[-1] - times[-2]
        dq_lp = {p: lp_norm(experiments._lap_q_field(st), p, grid) for p in config.serrin_p}
        du_lp = {p: lp_norm(experiments._grad_u_field(st), p, grid) for p in config.serrin_p}
        serrin_dq = {p: serrin_dq[p].update(dq_lp[p], dt_acc) for p in config.serrin_p}
        serrin_du = {p: serrin_du[p].update(du_lp[p], dt_acc) for p in config.serrin_p}
        eig_min, eig_max = _q_eig_range(st)
        row = {
            "t": st.time,
            "kinetic": bd.kinetic, "q_l2": bd.q_l2, "q_grad": bd.q_grad,
            "diss_visc": bd.diss_visc, "diss_q0": bd.diss_q0,
            "diss_q1": bd.diss_q1, "diss_q2": bd.diss_q2,
            "rhs_xi_terms": bd.rhs_xi_terms, "rhs_bulk_terms": bd.rhs_bulk_terms,
            "trq_max": st.Q.max_abs_trace(),
            "div_rel": st.u.divergence_rel(),
            "q_eig_min": eig_min, "q_eig_max": eig_max,
        }
        if config.probe_identities:
            row["identity_max"] = cancellation_probe(st, seed=config.seed).max()
        for p in config.serrin_p:
            row[f"serrin_dq_p{p:g}"] = serrin_dq[p].norm
            row[f"serrin_du_p{p:g}"] = serrin_du[p].norm
        partials.append(row)

    sample(state)
    step_counter = {"n": 0}

    def observer(st: StateSnapshot):
        step_counter["n"] += 1
        n = step_counter["n"]
        if n % config.stride == 0 or st.time >= config.t_end - 1e-12 * max(1.0, config.t_end):
            if not times or st.time > times[-1]:
                sample(st)
        if config.checkpoint_stride and n % config.checkpoint_stride == 0:
            write_checkpoint(st, os.path.join(out, f"ckpt_{n:06d}.ckpt"))

    final = integrate(state, cfg, config.t_end, observers=[observer])

    residuals = (
        energy_equality_residual_series(times, breakdowns)
        if len(times) >= 2
        else np.zeros(len(times))
    )
    for row, r in zip(partials, residuals):
        row["energy_residual"] = float(r)
        report.add_row(row)

    write_checkpoint(final, os.path.join(out, "final.ckpt"))
    meta = {
        "experiment": "single",
        "serrin_p": list(config.serrin_p),
        "probe_identities": config.probe_identities,
        "dt": cfg.dt,
        "scheme": cfg.scheme,
    }
    return report, meta


def summarize_single(report: TimeSeriesReport, meta: dict) -> dict:
    last = dict(zip(report.columns, report.rows[-1]))
    trq = report.column("trq_max").max()
    div = report.column("div_rel").max()
    summary = {
        "experiment": "single",
        "final_time": last["t"],
        "final": {c: last[c] for c in report.columns},
        "max_trq": float(trq),
        "max_div_rel": float(div),
        "q_eig_range": [float(report.column("q_eig_min").min()),
                        float(report.column("q_eig_max").max())],
        "energy_residual_final": last["energy_residual"],
        "flags": {"constraints_ok": bool(trq <= 1e-12 and div <= 1e-12)},
    }
    if "identity_max" in report.columns:
        summary["max_identity_residual"] = float(report.column("identity_max").max())
    return summary


# -- twin run ---------------------------------------------------------------------

def _perturbed(ic: StateSnapshot, delta: float, seed: int) -> StateSnapshot:
    v = random_traceless_q(ic.grid, spectrum=4.0, amplitude=1.0, seed=seed)
    q = QTensorField(ic.grid, ic.Q.components + delta * v.components)
    return replace(ic, Q=q)


def _twin_report_rows(rep: experiments.TwinRunReport) -> TimeSeriesReport:
    cols = [
        "t", "q_functional", "gronwall_integrand",
        "lap_q_lp", "grad_u_lp", "serrin_lap_q", "serrin_grad_u",
    ]
    desc = {
        "t": "sample time",
        "q_functional": "difference functional |w|^2 + |G|^2 + L |grad G|^2",
        "gronwall_integrand": "envelope integrand A(t) (NaN at p = 2 or 6)",
        "lap_q_lp": "instant |lap Q|_Lp of the strong run",
        "grad_u_lp": "instant |grad u|_Lp of the strong run",
        "serrin_lap_q": "running Serrin norm of lap Q (strong run)",
        "serrin_grad_u": "running Serrin norm of grad u (strong run)",
    }
    out = TimeSeriesReport(columns=cols, descriptions=desc)
    acc_q = SerrinAccumulator(rep.serrin_lap_q.spec)
    acc_u = SerrinAccumulator(rep.serrin_grad_u.spec)
    samples_q = rep.serrin_lap_q.samples
    samples_u = rep.serrin_grad_u.samples
    prev_t = rep.times[0]
    for i, t in enumerate(rep.times):
        dt_acc = 0.0 if i == 0 else t - prev_t
        acc_q = acc_q.update(samples_q[i][1], dt_acc)
        acc_u = acc_u.update(samples_u[i][1], dt_acc)
        out.add_row({
            "t": t,
            "q_functional": rep.q_functional[i],
            "gronwall_integrand": rep.gronwall_integrand[i],
            "lap_q_lp": samples_q[i][1],
            "grad_u_lp": samples_u[i][1],
            "serrin_lap_q": acc_q.norm,
            "serrin_grad_u": acc_u.norm,
        })
        prev_t = t
    return out


def _run_twin(config: RunConfig, out: str, resume: str | None):
    ic = build_initial_state(config, resume)
    cfg_a = step_config(config, ic)
    dt_b = config.dt_b if config.dt_b is not None else cfg_a.dt
    cfg_b = StepConfig(
        dt=dt_b, scheme=config.scheme_b,
        picard_tol=config.picard_tol, picard_max_iter=config.picard_max_iter,
        cfl_limit=config.cfl_limit,
    )
    ic_b = None
    if config.perturbation > 0.0:
        ic_b = _perturbed(ic, config.perturbation, config.seed + 7)
    rep = experiments.twin_run(
        ic, cfg_a, cfg_b, config.t_end, p=config.twin_p,
        ic_b=ic_b, n_samples=config.n_samples,
    )
    refined = None
    if config.perturbation > 0.0 and config.gronwall_refine:
        ic_b_half = _perturbed(ic, 0.5 * config.perturbation, config.seed + 7)
        refined = experiments.twin_run(
            ic, cfg_a, cfg_b, config.t_end, p=config.twin_p,
            ic_b=ic_b_half, n_samples=config.n_samples,
        )
    check = experiments.gronwall_envelope_check(rep, refined)
    report = _twin_report_rows(rep)
    meta = {
        "experiment": "twin",
        "p": config.twin_p,
        "perturbation": config.perturbation,
        "strong_run": rep.strong_label,
        "gronwall_c": check.fitted_c,
        "gronwall_degenerate": check.degenerate,
        "gronwall_stable": check.stable,
        "dt_a": cfg_a.dt, "scheme_a": cfg_a.scheme,
        "dt_b": cfg_b.dt, "scheme_b": cfg_b.scheme,
    }
    return report, meta


def summarize_twin(report: TimeSeriesReport, meta: dict) -> dict:
    q = report.column("q_functional")
    summary = {
        "experiment": "twin",
        "strong_run": meta.get("strong_run"),
        "p": meta.get("p"),
        "perturbation": meta.get("perturbation"),
        "q_functional_max": float(q.max()),
        "q_functional_final": float(q[-1]),
        "serrin_lap_q_final": float(report.column("serrin_lap_q")[-1]),
        "serrin_grad_u_final": float(report.column("serrin_grad_u")[-1]),
        "gronwall_c": meta.get("gronwall_c"),
        "gronwall_degenerate": meta.get("gronwall_degenerate"),
        "gronwall_stable": meta.get("gronwall_stable"),
        "flags": {},
    }
    if not meta.get("perturbation"):
        summary["flags"]["identical_runs_coincide"] = bool(q.max() <= 1e-14)
    return summary


# -- decay sweep ------------------------------------------------------------------

def _run_decay(config: RunConfig, out: str, resume: str | None):
    base = build_initial_state(config, resume)
    cfg = step_config(config, base)
    reports = experiments.small_data_decay(
        config.amplitudes, base, cfg, config.t_end, s=config.sobolev_s,
    )
    cols = ["amp_index", "amplitude", "t", "energy_hs", "dissipation_hs", "violations"]
    desc = {
        "amp_index": "index into the amplitude sweep",
        "amplitude": "IC scaling; E(0) = amplitude^2",
        "t": "sample time",
        "energy_hs": "higher-order energy E(t)",
        "dissipation_hs": "higher-order dissipation D(t)",
        "violations": "monotonicity violations so far for this amplitude",
    }
    report = TimeSeriesReport(columns=cols, descriptions=desc)
    for idx, rep in enumerate(reports):
        count = 0
        tol = 1e-10
        for i, t in enumerate(rep.times):
            if i > 0 and rep.energy[i] > rep.energy[i - 1] * (1.0 + tol):
                count += 1
            report.add_row({
                "amp_index": idx,
                "amplitude": rep.amplitude,
                "t": t,
                "energy_hs": rep.energy[i],
                "dissipation_hs": rep.dissipation[i],
                "violations": count,
            })
    meta = {
        "experiment": "decay-sweep",
        "amplitudes": list(config.amplitudes),
        "sobolev_s": config.sobolev_s,
        "dt": cfg.dt, "scheme": cfg.scheme,
    }
    return report, meta


def summarize_decay(report: TimeSeriesReport, meta: dict) -> dict:
    amplitudes = meta.get("amplitudes", [])
    idx_col = report.column("amp_index")
    per_amp = []
    largest_clean = None
    for idx, amp in enumerate(amplitudes):
        mask = idx_col == idx
        energy = report.column("energy_hs")[mask]
        violations = int(report.column("violations")[mask][-1])
        per_amp.append({
            "amplitude": amp,
            "initial_energy": float(energy[0]),
            "final_energy": float(energy[-1]),
            "monotone_violations": violations,
        })
        if violations == 0 and (largest_clean is None or amp > largest_clean):
            largest_clean = amp
    return {
        "experiment": "decay-sweep",
        "per_amplitude": per_amp,
        "largest_clean_amplitude": largest_clean,
        "flags": {"all_monotone": all(p["monotone_violations"] == 0 for p in per_amp)},
    }


# -- equality study ----------------------------------------------------------------

def _run_equality(config: RunConfig, out: str, resume: str | None):
    ic = build_initial_state(config, resume)
    grids = config.grids or (config.dims,)
    study = experiments.equality_convergence_study(
        ic, config.scheme, config.dts, grids, config.t_end,
    )
    cols = ["dt", "n1", "n2", "n3", "abs_residual"]
    desc = {
        "dt": "time step",
        "n1": "grid points, axis 1", "n2": "grid points, axis 2", "n3": "grid points, axis 3",
        "abs_residual": "|r(T)| for this dt/grid pair",
    }
    report = TimeSeriesReport(columns=cols, descriptions=desc)
    for i, dt in enumerate(study.dts):
        for j, dims in enumerate(study.grids):
            report.add_row({
                "dt": dt, "n1": dims[0], "n2": dims[1], "n3": dims[2],
                "abs_residual": study.residuals[i, j],
            })
    meta = {
        "experiment": "equality-study",
        "dts": list(study.dts),
        "grids": [list(g) for g in study.grids],
        "scheme": config.scheme,
    }
    return report, meta


def summarize_equality(report: TimeSeriesReport, meta: dict) -> dict:
    dts = meta["dts"]
    grids = [tuple(g) for g in meta["grids"]]
    table = np.array(report.column("abs_residual")).reshape(len(dts), len(grids))
    orders = []
    for i in range(len(dts) - 1):
        ratio = dts[i] / dts[i + 1]
        col = table[i, :] / np.maximum(table[i + 1, :], 1e-300)
        orders.append(float(np.log(col.mean()) / np.log(ratio)))
    grid_change = []
    for j in range(len(grids) - 1):
        a, b = table[:, j], table[:, j + 1]
        grid_change.append(float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
    return {
        "experiment": "equality-study",
        "dts": dts,
        "grids": [list(g) for g in grids],
        "residuals": table.tolist(),
        "dt_orders": orders,
        "grid_rel_change": grid_change,
        "flags": {"dt_order_at_least_1.9": bool(orders and min(orders) >= 1.9)},
    }


_RUNNERS = {
    "single": (_run_single, summarize_single),
    "twin": (_run_twin, summarize_twin),
    "decay-sweep": (_run_decay, summarize_decay),
    "equality-study": (_run_equality, summarize_equality),
}


def run(config: RunConfig, out: str | None = None, seed: int | None = None,
        resume: str | None = None) -> int:
    """Execute the configured experiment; returns a process exit status."""
    if seed is not None:
        config = replace(config, seed=seed, ic=replace(config.ic, seed=seed))
    out_dir = out or config.out
    os.makedirs(out_dir, exist_ok=True)
    if resume and config.experiment != "single":
        raise ConfigurationError("--resume is only supported for single runs")

    runner, summarize = _RUNNERS[config.experiment]
    report, meta = runner(config, out_dir, resume)
    csv_path = os.path.join(out_dir, "timeseries.csv")
    write_csv(csv_path, report)
    write_schema(os.path.join(out_dir, "timeseries.schema.json"), report, meta)
    summary = summarize(report, meta)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def reemit_summary(out_dir: str) -> dict:
    """Rebuild summary.json from the CSV and its schema sidecar."""
    schema_path = os.path.join(out_dir, "timeseries.schema.json")
    csv_path = os.path.join(out_dir, "timeseries.csv")
    if not os.path.exists(schema_path) or not os.path.exists(csv_path):
        raise ConfigurationError(f"{out_dir} does not contain timeseries.csv + schema")
    with open(schema_path, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    meta = schema["meta"]
    report = read_csv(csv_path)
    expected = [c["name"] for c in schema["columns"]]
    if expected != report.columns:
        raise ConfigurationError("CSV columns do not match the schema sidecar")
    summarize = _RUNNERS[meta["experiment"]][1]
    summary = summarize(report, meta)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
