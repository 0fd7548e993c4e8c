from __future__ import annotations

import numpy as np
import pytest

from potts_ees.lattice import enumerate_lattice


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def lattice6():
    return enumerate_lattice(6)


@pytest.fixture
def out_dir(tmp_path):
    d = tmp_path / "results"
    d.mkdir()
    return d
