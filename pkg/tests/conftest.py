import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from models.schemas import KernelParams, QuadratureSpec
from server import app
from settings import get_settings

settings = get_settings()

@pytest.fixture(scope="session")
def seed():
    return settings.DEFAULT_SEED

@pytest.fixture(scope="session")
def laplace_3d():
    """m = 1, N = 3: the Newtonian kernel of the unit ball"""
    return KernelParams(N=3, m=1, q=2.0)

@pytest.fixture(scope="session")
def biharmonic_3d():
    return KernelParams(N=3, m=2, q=2.0)

@pytest.fixture(scope="session")
def quadrature():
    return QuadratureSpec(target_rel_error=1e-9)

@pytest.fixture(scope="function")
def client():
    yield TestClient(app)

@pytest.fixture(scope="function")
def runner():
    return CliRunner()
