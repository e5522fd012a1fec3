"""Pytest fixtures for treeirs tests."""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from src.autom import FinitaryAutomorphism
from src.boundary import ClosedSetApprox
from src.groups import TruncatedWreathGroup


@pytest.fixture
def rng():
    """Seeded generator; every test gets a fresh one."""
    return np.random.default_rng(20240611)


@pytest.fixture
def s2_2():
    return TruncatedWreathGroup(2, 2)


@pytest.fixture
def s2_3():
    return TruncatedWreathGroup(2, 3)


@pytest.fixture
def a3_2():
    return TruncatedWreathGroup(3, 2, "alternating")


@pytest.fixture
def root_swap():
    """The swap of the two level-1 subtrees of the binary tree."""
    return FinitaryAutomorphism.from_portrait(2, {"": [1, 0]})


@pytest.fixture
def swap_at_0():
    return FinitaryAutomorphism.from_portrait(2, {"0": [1, 0]})


@pytest.fixture
def mixed_set():
    """Sh("00") together with the ray 1111, at depth 4: closed but not open."""
    return ClosedSetApprox.from_leaves(2, 4, ["0000", "0001", "0010", "0011", "1111"])


@pytest.fixture
def temp_config_dir():
    """Temporary directory for config files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def sample_config():
    """A small experiment: the level-1 stabilizer of S_2^wr(3)."""
    return {
        "d": 2,
        "n": 3,
        "flavor": "symmetric",
        "sampler": {"kind": "level", "level": 1, "generators": []},
        "trials": 50,
        "seed": 7,
    }


@pytest.fixture
def mock_config_file(temp_config_dir, sample_config):
    """Write the sample config and return its path."""
    config_path = temp_config_dir / "config.json"
    config_path.write_text(json.dumps(sample_config))
    return config_path


@pytest.fixture
def write_json(temp_config_dir):
    """Write a JSON document into the temp dir and return its path."""

    def _write(name: str, data) -> Path:
        path = temp_config_dir / name
        path.write_text(json.dumps(data))
        return path

    return _write
