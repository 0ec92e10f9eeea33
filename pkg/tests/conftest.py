# FILE: tests/conftest.py
# ============================================================================
import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.core.config import settings
from app.core.rate_limit import limiter
from app.schemas.params import SystemParams


def finite_difference(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, perturbing ``x`` in place."""
    grad = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        up = f()
        flat[i] = saved - step
        down = f()
        flat[i] = saved
        out[i] = (up - down) / (2.0 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12))


@pytest.fixture
def fd():
    return finite_difference


@pytest.fixture
def rel_err():
    return relative_error


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return SystemParams.default(4, seed=0)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_ROOT", str(tmp_path))
    return tmp_path


@pytest.fixture
def fast_training(monkeypatch):
    """Shrink checkpoint and training cadence for short runs."""
    monkeypatch.setattr(settings, "CHECKPOINT_INTERVAL", 20)
    monkeypatch.setattr(settings, "BATCH_SIZE", 16)


@pytest.fixture
def client(output_root):
    from app.main import app

    limiter.reset()
    with TestClient(app) as test_client:
        yield test_client
