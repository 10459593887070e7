import numpy as np
import pytest

import besim


@pytest.fixture(scope="session")
def grid8():
    return besim.make_grid((8, 8, 8))


@pytest.fixture(scope="session")
def grid16():
    return besim.make_grid((16, 16, 16))


@pytest.fixture
def params():
    return besim.ModelParams(a=1.0, b=1.0, c=1.0, L=0.7, Gamma=0.9, mu=0.8, xi=0.5)


def random_state(grid, params, seed=0, q_amp=0.5, u_amp=0.4, spectrum=2.0):
    """Dealiased, constraint-satisfying random state."""
    q = besim.random_traceless_q(grid, spectrum, q_amp, seed)
    u = besim.random_solenoidal_velocity(grid, spectrum, u_amp, seed + 1)
    return besim.StateSnapshot(0.0, q, u, params)


def single_mode_state(grid, params, wave=(1, 1, 0), component=1, amplitude=1.0):
    """Q carrying one sine mode in one stored component, u = 0."""
    coords = grid.coordinates()
    phase = sum(w * x for w, x in zip(wave, coords))
    q6 = np.zeros((6,) + grid.dims)
    q6[component] = amplitude * np.sin(phase)
    q = besim.QTensorField(grid, q6)
    u = besim.VelocityField(grid, np.zeros((3,) + grid.dims))
    return besim.StateSnapshot(0.0, q, u, params)
