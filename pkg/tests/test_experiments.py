import math

import numpy as np
import pytest

import besim
from besim import spectral
from besim.errors import ConfigurationError
from besim.experiments import (
    _resample_state,
    difference_functional,
    equality_convergence_study,
    gronwall_envelope_check,
    gronwall_integrand,
    largest_clean_amplitude,
    small_data_decay,
    twin_run,
)
from besim.stepping import StepConfig, integrate

from conftest import random_state, single_mode_state


def test_difference_functional_zero_for_identical(grid8, params):
    state = random_state(grid8, params, seed=1)
    assert difference_functional(state, state) == 0.0


def test_difference_functional_positive(grid8, params):
    a = random_state(grid8, params, seed=2)
    b = random_state(grid8, params, seed=3)
    assert difference_functional(a, b) > 0.0


def test_twin_identical_configs(grid8, params):
    ic = random_state(grid8, params, seed=4, q_amp=0.3, u_amp=0.3)
    cfg = StepConfig(dt=2e-3, scheme="imex")
    rep = twin_run(ic, cfg, cfg, 0.02, p=4.0, n_samples=5)
    assert rep.q_max == 0.0
    assert rep.q_functional[0] == 0.0


def test_twin_scheme_gap_shrinks_with_dt(grid8, params):
    ic = random_state(grid8, params, seed=5, q_amp=0.3, u_amp=0.3)
    t_end = 0.04

    def q_final(dt):
        rep = twin_run(
            ic,
            StepConfig(dt=dt, scheme="rk4"),
            StepConfig(dt=dt, scheme="imex"),
            t_end, p=4.0, n_samples=4,
        )
        assert rep.strong_label == "a"
        return rep.q_functional[-1]

    ratio = q_final(2e-3) / q_final(1e-3)
    assert 3.0 <= ratio <= 5.0


def test_twin_serrin_norms_monotone(grid8, params):
    ic = random_state(grid8, params, seed=6, q_amp=0.3, u_amp=0.3)
    cfg_a = StepConfig(dt=2e-3, scheme="rk4")
    cfg_b = StepConfig(dt=2e-3, scheme="imex")
    rep = twin_run(ic, cfg_a, cfg_b, 0.02, p=4.0, n_samples=5)
    values = [s for _, s in rep.serrin_lap_q.samples]
    assert all(v >= 0 for v in values)
    assert rep.serrin_lap_q.norm >= 0.0
    # running integral is monotone by construction
    assert rep.serrin_lap_q.integral >= 0.0


def test_twin_endpoint_p_has_nan_integrand(grid8, params):
    ic = random_state(grid8, params, seed=7, q_amp=0.2, u_amp=0.2)
    cfg = StepConfig(dt=5e-3, scheme="imex")
    rep = twin_run(ic, cfg, cfg, 0.01, p=2.0, n_samples=2)
    assert all(math.isnan(a) for a in rep.gronwall_integrand)


def test_gronwall_degenerate_for_identical_ics(grid8, params):
    ic = random_state(grid8, params, seed=8, q_amp=0.2, u_amp=0.2)
    cfg = StepConfig(dt=5e-3, scheme="imex")
    rep = twin_run(ic, cfg, cfg, 0.02, p=4.0, n_samples=4)
    check = gronwall_envelope_check(rep)
    assert check.degenerate


def test_gronwall_linear_decay_gives_zero_c(grid8):
    # b = c = xi = 0, u = 0, single-mode perturbation: Q(t) decays, so the
    # fitted envelope constant is zero
    p = besim.ModelParams(a=1.0, b=0.0, c=0.0, xi=0.0)
    ic = single_mode_state(grid8, p, wave=(1, 0, 0), amplitude=0.1)
    ic_b = single_mode_state(grid8, p, wave=(1, 0, 0), amplitude=0.1001)
    cfg = StepConfig(dt=1e-3, scheme="rk4")
    rep = twin_run(ic, cfg, cfg, 0.05, p=4.0, ic_b=ic_b, n_samples=5)
    check = gronwall_envelope_check(rep)
    assert not check.degenerate
    assert check.fitted_c == 0.0


def test_gronwall_stability_under_perturbation_refinement(grid8, params):
    ic = random_state(grid8, params, seed=9, q_amp=0.3, u_amp=0.3)
    cfg_a = StepConfig(dt=1e-3, scheme="rk4")
    cfg_b = StepConfig(dt=1e-3, scheme="rk4")

    def perturbed(delta):
        v = besim.random_traceless_q(ic.grid, 4.0, 1.0, seed=77)
        q = besim.QTensorField(ic.grid, ic.Q.components + delta * v.components)
        return besim.StateSnapshot(0.0, q, ic.u, params)

    rep = twin_run(ic, cfg_a, cfg_b, 0.05, p=4.0, ic_b=perturbed(1e-4), n_samples=8)
    rep_half = twin_run(ic, cfg_a, cfg_b, 0.05, p=4.0, ic_b=perturbed(5e-5), n_samples=8)
    check = gronwall_envelope_check(rep, rep_half)
    assert check.stable is True


def test_gronwall_integrand_requires_interior_p(grid8, params):
    a = random_state(grid8, params, seed=10)
    b = random_state(grid8, params, seed=11)
    assert math.isnan(gronwall_integrand(a, b, 2.0))
    assert math.isnan(gronwall_integrand(a, b, 6.0))
    assert math.isfinite(gronwall_integrand(a, b, 4.0))


def test_small_data_zero_amplitude(grid8, params):
    base = random_state(grid8, params, seed=12, q_amp=0.5, u_amp=0.5)
    cfg = StepConfig(dt=5e-3, scheme="imex")
    reports = small_data_decay([0.0], base, cfg, 0.02, s=2)
    assert reports[0].monotone_violations == 0
    assert max(reports[0].energy) == 0.0


def test_small_data_requires_positive_a(grid8):
    p = besim.ModelParams(a=-1.0, b=1.0, c=1.0)
    base = random_state(grid8, p, seed=13)
    with pytest.raises(ConfigurationError, match="a > 0"):
        small_data_decay([1e-3], base, StepConfig(dt=1e-3), 0.01)


def test_small_data_amplitude_is_initial_energy(grid8, params):
    base = random_state(grid8, params, seed=14, q_amp=0.5, u_amp=0.5)
    cfg = StepConfig(dt=5e-3, scheme="imex")
    reports = small_data_decay([1e-3, 2e-3], base, cfg, 0.01, s=2)
    for rep in reports:
        assert rep.initial_energy == pytest.approx(rep.amplitude ** 2, rel=1e-12)
    assert largest_clean_amplitude(reports) is not None


def test_small_data_modewise_decay_oracle(grid16):
    # xi = 0, b = c = 0, u0 = 0, all modes along one axis with one common
    # direction: the flow never starts and every mode decays analytically
    p = besim.ModelParams(a=1.0, b=0.0, c=0.0, L=1.0, Gamma=1.0, mu=1.0, xi=0.0)
    x1 = grid16.coordinates()[0]
    q6 = np.zeros((6,) + grid16.dims)
    for j, c in ((1, 1.0), (2, 0.5)):
        q6[1] += c * np.sin(j * x1)
    ic = besim.StateSnapshot(
        0.0, besim.QTensorField(grid16, q6),
        besim.VelocityField(grid16, np.zeros((3,) + grid16.dims)), p,
    )
    s = 2
    t_end = 0.2

    # oracle: per-mode weights from the initial spectrum, exact decay rates
    qh = spectral.rfftn(ic.Q.components)
    weights = {}
    for j in (1, 2):
        mode_sq = 2.0 * (abs(qh[1, j, 0, 0]) ** 2 + abs(qh[1, -j % 16, 0, 0]) ** 2)
        # |Q|^2 Frobenius doubles the xy component; Parseval scaling
        mode_sq *= 2.0 * grid16.volume / grid16.n_points ** 2
        k2 = float(j * j)
        weights[j] = (1.0 + k2) ** s * (p.a + p.L * k2) * mode_sq
    expected = sum(w * math.exp(-2.0 * p.Gamma * (p.L * j * j + p.a) * t_end)
                   for j, w in weights.items())

    reports = small_data_decay([math.sqrt(sum(weights.values()))], ic,
                               StepConfig(dt=5e-4, scheme="rk4"), t_end, s=s)
    rep = reports[0]
    assert rep.monotone_violations == 0
    assert rep.energy[-1] == pytest.approx(expected, rel=1e-8)


def test_resample_state_embeds_band_limited(grid8, params):
    state = random_state(grid8, params, seed=15)
    fine = besim.make_grid((16, 16, 16))
    up = _resample_state(state, fine)
    # L2 norms preserved under spectral embedding
    e_coarse = spectral.l2_norm_sq(grid8, state.u.components)
    e_fine = spectral.l2_norm_sq(fine, up.u.components)
    assert e_fine == pytest.approx(e_coarse, rel=1e-12)


def test_equality_study_orders(grid8, params):
    ic = random_state(grid8, params, seed=16, q_amp=0.3, u_amp=0.3)
    study = equality_convergence_study(ic, "rk4", [8e-3, 4e-3, 2e-3], [grid8.dims], 0.1)
    assert min(study.dt_orders) >= 1.9
    assert study.residuals.shape == (3, 1)


def test_equality_study_grid_saturation(grid8, params):
    # band-limited IC: refining the grid changes nothing (< 1%)
    ic = random_state(grid8, params, seed=17, q_amp=0.3, u_amp=0.3)
    study = equality_convergence_study(
        ic, "rk4", [4e-3], [(8, 8, 8), (16, 16, 16), (32, 32, 32)], 0.05
    )
    assert max(study.grid_rel_change) <= 0.01


def test_equality_study_ladder_validation(grid8, params):
    ic = random_state(grid8, params, seed=18)
    with pytest.raises(ConfigurationError):
        equality_convergence_study(ic, "rk4", [1e-3, 5e-4], [grid8.dims], 0.01)
    with pytest.raises(ConfigurationError):
        equality_convergence_study(ic, "rk4", [], [grid8.dims], 0.01)
