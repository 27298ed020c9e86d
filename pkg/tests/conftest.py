import pytest

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.models import ModelParams


@pytest.fixture
def tol():
    return 1e-10


@pytest.fixture
def chain():
    """The chain used for the published light-cone runs."""
    return ModelParams(J=1.0, h=5.0, gamma=0.2, dimension=1, n_sites=200)


@pytest.fixture
def small_chain():
    return ModelParams(J=1.0, h=5.0, gamma=0.2, dimension=1, n_sites=16)


@pytest.fixture
def small_square():
    return ModelParams(J=1.0, h=5.0, gamma=0.2, dimension=2, n_sites=8)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Redirect default run outputs into a per-test directory."""
    monkeypatch.setattr(Config, "OUTPUT_ROOT", tmp_path / "runs")
    return tmp_path / "runs"
