import pytest

from shadowbag.schemas.config import EigenFloor, ScheduleParams, Settings
from shadowbag.services.corrmat_service import build_product_cache
from shadowbag.services.model_service import load_hamiltonian
from shadowbag.services.pauli_service import enumerate_basis


@pytest.fixture
def settings(tmp_path) -> Settings:
    return Settings(output_root=tmp_path / "runs", checkpoint_every=2)


@pytest.fixture(scope="session")
def cache_l4():
    return build_product_cache(enumerate_basis(4, 2))


@pytest.fixture(scope="session")
def main_l4():
    return load_hamiltonian("main", 4)


@pytest.fixture
def loose_floor() -> EigenFloor:
    """eps0 so large that every iterate of a small bag is feasible from the start."""
    return EigenFloor(alpha0=0.0, b0=1e5)


@pytest.fixture
def short_schedule() -> ScheduleParams:
    return ScheduleParams(T=4, x_eps_target=1.0)
