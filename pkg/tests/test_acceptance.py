"""Acceptance suite: one test per criterion, each printing a PASS line.

The nonlinear 32^3 runs dominate the runtime (about ten minutes total on a
two-core box); everything is deterministic, so reruns are bit-identical.
"""

import json
import math
import time

import numpy as np
import pytest

import besim
from besim.diagnostics import (
    SerrinAccumulator,
    SerrinSpec,
    energy_breakdown,
    energy_equality_residual_series,
    variational_consistency,
)
from besim.experiments import small_data_decay, twin_run
from besim.runner import read_csv
from besim.stepping import StepConfig, integrate, step_imex, step_imex_picard

from conftest import random_state, single_mode_state


def _report(number: int, elapsed: float, detail: str):
    print(f"[criterion {number:2d}] PASS in {elapsed:6.1f}s: {detail}")


@pytest.fixture(scope="module")
def nonlinear32():
    """The smooth nonlinear reference run: xi=0.5, a=b=c=1 on 32^3."""
    grid = besim.make_grid((32, 32, 32))
    params = besim.ModelParams(a=1.0, b=1.0, c=1.0, L=1.0, Gamma=1.0, mu=1.0, xi=0.5)
    ic = random_state(grid, params, seed=2026, q_amp=0.3, u_amp=0.3, spectrum=3.0)
    return ic


@pytest.fixture(scope="module")
def residual_ladder(nonlinear32):
    """r(T=0.5) for dt in {4e-3, 2e-3, 1e-3}, plus 1000 steps of constraint
    samples from the dt=1e-3 run (continued to T=1 by restart consistency)."""
    ic = nonlinear32
    t0 = time.perf_counter()
    residuals = {}
    constraints = []
    final_states = {}
    for dt in (4e-3, 2e-3, 1e-3):
        cfg = StepConfig(dt=dt, scheme="rk4")
        times = [ic.time]
        series = [energy_breakdown(ic)]

        def observe(st):
            times.append(st.time)
            series.append(energy_breakdown(st))
            if dt == 1e-3:
                constraints.append((st.Q.max_abs_trace(), st.u.divergence_rel()))

        final_states[dt] = integrate(ic, cfg, 0.5, observers=[observe])
        residuals[dt] = abs(float(energy_equality_residual_series(times, series)[-1]))
    ladder_elapsed = time.perf_counter() - t0

    def constraint_observer(st):
        constraints.append((st.Q.max_abs_trace(), st.u.divergence_rel()))

    integrate(final_states[1e-3], StepConfig(dt=1e-3, scheme="rk4"), 1.0,
              observers=[constraint_observer])
    return {
        "residuals": residuals,
        "constraints": constraints,
        "ladder_elapsed": ladder_elapsed,
    }


def test_criterion_01_cancellation_suite():
    t0 = time.perf_counter()
    worst = 0.0
    params = besim.ModelParams()
    for dims, count in (((16, 16, 16), 50), ((32, 32, 32), 50)):
        grid = besim.make_grid(dims)
        for i in range(count):
            rng = np.random.default_rng(1000 + i)
            q_amp = 0.2 + 1.5 * rng.random()
            u_amp = 0.2 + 1.5 * rng.random()
            state = random_state(grid, params, seed=3 * i + dims[0], q_amp=q_amp, u_amp=u_amp)
            probe = besim.cancellation_probe(state, seed=50_000 + i)
            worst = max(worst, probe.max())
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-10, f"worst normalized residual {worst:.3e}"
    assert elapsed < 30.0, f"runtime {elapsed:.1f}s"
    _report(1, elapsed, f"six identities on 100 states, worst residual {worst:.2e}")


def test_criterion_02_variational_consistency():
    t0 = time.perf_counter()
    grid = besim.make_grid((16, 16, 16))
    params = besim.ModelParams(a=1.0, b=1.0, c=1.0, L=1.0)
    worst_coarse = 0.0
    ratios = []
    for i in range(10):
        q = besim.random_traceless_q(grid, 2.5, 6.0, seed=200 + i)
        m1 = variational_consistency(q, params, eps=1e-4, directions=20, seed=i)
        m2 = variational_consistency(q, params, eps=5e-5, directions=20, seed=i)
        worst_coarse = max(worst_coarse, m1)
        ratios.append(m1 / m2)
    elapsed = time.perf_counter() - t0
    assert worst_coarse <= 1e-6, f"worst mismatch {worst_coarse:.3e}"
    assert all(3.0 <= r <= 5.0 for r in ratios), f"eps-halving ratios {ratios}"
    assert elapsed < 20.0, f"runtime {elapsed:.1f}s"
    _report(2, elapsed, f"worst mismatch {worst_coarse:.2e}, ratio range "
                        f"[{min(ratios):.2f}, {max(ratios):.2f}]")


def test_criterion_03_linear_subcase_exactness():
    t0 = time.perf_counter()
    grid = besim.make_grid((8, 8, 8))
    params = besim.ModelParams(a=1.0, b=0.0, c=0.0, L=1.0, Gamma=1.0, mu=1.0, xi=0.0)
    state = single_mode_state(grid, params, wave=(1, 1, 0))

    def coeff(st):
        return besim.spectral.rfftn(st.Q.components[1])[1, 1, 0]

    dt = 5e-3
    out = step_imex(state, StepConfig(dt=dt))
    amp = (coeff(out) / coeff(state)).real
    expected = (1.0 - dt * 1.0 * 1.0) / (1.0 + dt * 1.0 * 1.0 * 2.0)
    amp_err = abs(amp - expected)
    assert amp_err <= 1e-13

    out = integrate(state, StepConfig(dt=1e-3, scheme="rk4"), 1.0)
    decay = (coeff(out) / coeff(state)).real
    exact = math.exp(-1.0 * (1.0 * 2.0 + 1.0))
    rk4_err = abs(decay - exact) / exact
    assert rk4_err <= 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"runtime {elapsed:.1f}s"
    _report(3, elapsed, f"IMEX factor err {amp_err:.1e}, RK4 decay err {rk4_err:.1e}")


def test_criterion_04_energy_equality_convergence(residual_ladder):
    res = residual_ladder["residuals"]
    order_a = math.log2(res[4e-3] / res[2e-3])
    order_b = math.log2(res[2e-3] / res[1e-3])
    elapsed = residual_ladder["ladder_elapsed"]
    assert order_a >= 1.9 and order_b >= 1.9, (order_a, order_b)
    assert elapsed < 300.0, f"runtime {elapsed:.1f}s"
    _report(4, elapsed, f"|r(0.5)| orders {order_a:.2f}, {order_b:.2f} "
                        f"(residuals {res[4e-3]:.2e} -> {res[1e-3]:.2e})")


def test_criterion_05_constraint_preservation(residual_ladder):
    t0 = time.perf_counter()
    constraints = residual_ladder["constraints"]
    assert len(constraints) >= 1000
    worst_tr = max(tr for tr, _ in constraints[:1000])
    worst_div = max(dv for _, dv in constraints[:1000])
    assert worst_tr <= 1e-12, f"max |Tr Q| {worst_tr:.3e}"
    assert worst_div <= 1e-12, f"max relative divergence {worst_div:.3e}"
    _report(5, time.perf_counter() - t0,
            f"1000 steps: max |Tr Q| {worst_tr:.1e}, max div {worst_div:.1e}")


def test_criterion_06_serrin_accumulator_arithmetic():
    t0 = time.perf_counter()
    c, t_end, n = 1.3, 4.0, 4000
    dt = t_end / n

    def folded(p):
        acc = SerrinAccumulator(SerrinSpec.from_p(p))
        for _ in range(n):
            acc = acc.update(c, dt)
        return acc.norm

    assert folded(6.0) == pytest.approx(c * math.sqrt(t_end), rel=1e-12)
    assert folded(4.0) == pytest.approx(c * t_end ** (3.0 / 8.0), rel=1e-12)
    acc2 = SerrinAccumulator(SerrinSpec.from_p(2.0))
    for v in (0.2, c, 0.7):
        acc2 = acc2.update(v, dt)
    assert acc2.norm == c
    for p in np.linspace(2.0 + 1e-9, 6.0, 101):
        spec = SerrinSpec.from_p(float(p))
        assert abs(2.0 / spec.q + 3.0 / p - 1.5) <= 1e-12
    elapsed = time.perf_counter() - t0
    _report(6, elapsed, "closed forms at p = 6, 4, 2 and the exponent relation hold")


def test_criterion_07_twin_run_mechanism(nonlinear32):
    t0 = time.perf_counter()
    ic = nonlinear32
    t_end = 0.1

    # identical ICs and configs coincide for all t
    cfg = StepConfig(dt=2e-3, scheme="imex")
    rep_same = twin_run(ic, cfg, cfg, t_end, p=4.0, n_samples=8)
    q_same = rep_same.q_max
    assert q_same <= 1e-14

    def q_final(dt):
        rep = twin_run(
            ic, StepConfig(dt=dt, scheme="rk4"), StepConfig(dt=dt, scheme="imex"),
            t_end, p=4.0, n_samples=4,
        )
        return rep.q_functional[-1]

    ratio = q_final(2e-3) / q_final(1e-3)
    elapsed = time.perf_counter() - t0
    assert 3.0 <= ratio <= 5.0, f"dt-halving ratio {ratio:.3f}"
    assert elapsed < 300.0, f"runtime {elapsed:.1f}s"
    _report(7, elapsed, f"identical twins Q_max {q_same:.1e}; RK4/IMEX ratio {ratio:.2f}")


def test_criterion_08_small_data_decay():
    t0 = time.perf_counter()
    grid = besim.make_grid((32, 32, 32))
    params = besim.ModelParams(a=1.0, b=1.0, c=1.0, L=1.0, Gamma=1.0, mu=1.0, xi=1.0)
    base = random_state(grid, params, seed=88, q_amp=1.0, u_amp=1.0, spectrum=3.0)
    reports = small_data_decay([1e-3], base, StepConfig(dt=2.5e-3, scheme="imex"), 2.0, s=2)
    rep = reports[0]
    elapsed = time.perf_counter() - t0
    assert rep.initial_energy == pytest.approx(1e-6, rel=1e-12)
    assert rep.monotone_violations == 0
    assert rep.energy[-1] < rep.energy[0]
    assert elapsed < 300.0, f"runtime {elapsed:.1f}s"
    _report(8, elapsed, f"E(0)=1e-6 decays to {rep.energy[-1]:.2e} with zero violations")


def test_criterion_09_picard_convergence():
    t0 = time.perf_counter()
    grid = besim.make_grid((8, 8, 8))
    linear = besim.ModelParams(a=1.0, b=0.0, c=0.0, L=1.0, Gamma=1.0, mu=1.0, xi=0.0)
    state = single_mode_state(grid, linear, wave=(1, 1, 0))
    _, trace = step_imex_picard(state, StepConfig(dt=1e-2, scheme="imex-picard"))
    assert trace.converged and len(trace.iterates) == 2 and trace.iterates[1] <= 1e-14

    grid16 = besim.make_grid((16, 16, 16))
    params = besim.ModelParams(a=1.0, b=1.0, c=1.0, xi=1.0)
    small = random_state(grid16, params, seed=9, q_amp=0.05, u_amp=0.05)
    cfg = StepConfig(dt=1e-3, scheme="imex-picard", picard_tol=1e-30, picard_max_iter=6)
    from besim.errors import PicardDivergenceError
    with pytest.raises(PicardDivergenceError) as err:
        step_imex_picard(small, cfg)
    res = err.value.trace.iterates
    ratios = [res[i + 1] / res[i] for i in range(3)]
    elapsed = time.perf_counter() - t0
    assert max(ratios) < 0.5, f"contraction ratios {ratios}"
    assert elapsed < 60.0, f"runtime {elapsed:.1f}s"
    _report(9, elapsed, f"linear: 1 iteration; nonlinear contraction <= {max(ratios):.2e}")


def test_criterion_10_determinism_and_persistence(tmp_path):
    from besim.checkpoint import read_checkpoint
    from besim.cli import main

    t0 = time.perf_counter()
    text = """
[grid]
dims = 8 8 8

[params]
a = 1.0
b = 1.0
c = 1.0
xi = 0.5

[step]
scheme = imex
dt = 0.005

[experiment]
kind = single
T = 0.05
ic = random
ic_q_amplitude = 0.3
ic_u_amplitude = 0.3
"""
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    half_cfg = tmp_path / "half.cfg"
    half_cfg.write_text(text.replace("T = 0.05", "T = 0.025"))

    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(out_a), "--seed", "5"]) == 0
    assert main(["run", str(cfg), "--out", str(out_b), "--seed", "5"]) == 0
    byte_identical = (out_a / "timeseries.csv").read_bytes() == (out_b / "timeseries.csv").read_bytes()
    assert byte_identical

    out_half, out_resumed = tmp_path / "half", tmp_path / "resumed"
    assert main(["run", str(half_cfg), "--out", str(out_half), "--seed", "5"]) == 0
    assert main(["run", str(cfg), "--out", str(out_resumed), "--seed", "5",
                 "--resume", str(out_half / "final.ckpt")]) == 0
    full_state = read_checkpoint(out_a / "final.ckpt")
    split_state = read_checkpoint(out_resumed / "final.ckpt")
    scale = max(np.abs(full_state.Q.components).max(), 1.0)
    q_gap = np.abs(split_state.Q.components - full_state.Q.components).max()
    u_gap = np.abs(split_state.u.components - full_state.u.components).max()
    assert q_gap <= 1e-14 * scale and u_gap <= 1e-14 * scale
    elapsed = time.perf_counter() - t0
    _report(10, elapsed, f"byte-identical CSVs; split-run state gap {max(q_gap, u_gap):.1e}")
