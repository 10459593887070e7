import numpy as np
import pytest

import besim
from besim.checkpoint import MAGIC, read_checkpoint, write_checkpoint
from besim.errors import CheckpointFormatError

from conftest import random_state


def test_roundtrip_bit_exact(tmp_path, grid8, params):
    state = random_state(grid8, params, seed=1)
    state = besim.StateSnapshot(0.625, state.Q, state.u, params)
    path = tmp_path / "state.ckpt"
    write_checkpoint(state, path)
    back = read_checkpoint(path)
    assert back.time == state.time
    assert np.array_equal(back.Q.components, state.Q.components)
    assert np.array_equal(back.u.components, state.u.components)
    assert back.params == params
    assert back.grid.dims == grid8.dims
    assert back.grid.box == grid8.box


def test_wrong_magic_names_expected(tmp_path, grid8, params):
    path = tmp_path / "bad.ckpt"
    write_checkpoint(random_state(grid8, params), path)
    raw = bytearray(path.read_bytes())
    raw[:6] = b"NOTME1"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointFormatError, match="BESIM1"):
        read_checkpoint(path)
    assert MAGIC == b"BESIM1"


def test_truncated_payload_reports_lengths(tmp_path, grid8, params):
    path = tmp_path / "short.ckpt"
    write_checkpoint(random_state(grid8, params), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CheckpointFormatError, match="expected") as err:
        read_checkpoint(path)
    assert "bytes" in str(err.value)


def test_header_too_short(tmp_path):
    path = tmp_path / "stub.ckpt"
    path.write_bytes(b"BESIM1<")
    with pytest.raises(CheckpointFormatError, match="header"):
        read_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointFormatError):
        read_checkpoint(tmp_path / "missing.ckpt")
