import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture
def cache_dir(tmp_path):
    d = tmp_path / "basis_cache"
    d.mkdir()
    return str(d)
