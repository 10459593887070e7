import numpy as np
import pytest

import besim
from besim.errors import ConfigurationError


def test_fft_frequency_ordering(grid8):
    assert list(grid8.freqs[0]) == [0, 1, 2, 3, -4, -3, -2, -1]


def test_dealias_mask_two_thirds(grid8):
    # N=8 keeps |k| <= 2 on every axis
    kept = np.array(grid8.freqs[0])[grid8.dealias_mask.any(axis=(1, 2))]
    assert np.abs(kept).max() == 2
    assert set(np.abs(kept)) == {0, 1, 2}


def test_dealias_mask_mixed_dims():
    grid = besim.make_grid((6, 4, 4))
    # enumerate the rule axis by axis: floor(6/3)=2, floor(4/3)=1
    f1 = np.abs(np.array(grid.freqs[0]))[:, None, None]
    f2 = np.abs(np.array(grid.freqs[1]))[None, :, None]
    f3 = np.arange(3)[None, None, :]
    expected = (f1 <= 2) & (f2 <= 1) & (f3 <= 1)
    assert np.array_equal(grid.dealias_mask, expected)


def test_wavenumbers_scale_with_box():
    grid = besim.make_grid((8, 8, 8), (4.0, 2.0, 1.0))
    assert grid.wavenumbers[0][1] == pytest.approx(2 * np.pi / 4.0)
    assert grid.wavenumbers[1][1] == pytest.approx(2 * np.pi / 2.0)
    assert grid.wavenumbers[2][1] == pytest.approx(2 * np.pi)


@pytest.mark.parametrize("dims", [(7, 8, 8), (8, 8, 2), (8, 0, 8), (8, 8, 9)])
def test_bad_dims_rejected(dims):
    with pytest.raises(ConfigurationError):
        besim.make_grid(dims)


@pytest.mark.parametrize("box", [(0.0, 1.0, 1.0), (-1.0, 1.0, 1.0)])
def test_bad_box_rejected(box):
    with pytest.raises(ConfigurationError):
        besim.make_grid((8, 8, 8), box)


def test_volume_and_spacing(grid8):
    assert grid8.volume == pytest.approx((2 * np.pi) ** 3)
    assert grid8.min_spacing == pytest.approx(2 * np.pi / 8)
    assert grid8.n_points == 512
