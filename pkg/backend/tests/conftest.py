import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# isolated run cache for the HTTP tests; must be set before app.core.config is imported
_TMP = Path(tempfile.mkdtemp(prefix="vscpt-tests-"))
os.environ.setdefault("DATABASE_URL", f"sqlite+aiosqlite:///{_TMP / 'runs.db'}")
os.environ.setdefault("VSCPT_OUTPUT_DIR", str(_TMP / "outputs"))

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from app.services.basis import MomentumGrid  # noqa: E402
from app.services.hamiltonian import SimParams  # noqa: E402
from app.services.liouvillian import FamilyBlockState, build_initial_state  # noqa: E402
from app.services.scenarios import merge_config  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-length physics runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_grid() -> MomentumGrid:
    return MomentumGrid(4.0, 5)


@pytest.fixture
def equal_params() -> SimParams:
    return SimParams(0.3, 0.3)


@pytest.fixture
def asym_params() -> SimParams:
    return SimParams(0.3, 0.24)


@pytest.fixture
def initial_state(small_grid) -> FamilyBlockState:
    return build_initial_state(small_grid, 0.15)


@pytest.fixture
def random_state(small_grid) -> FamilyBlockState:
    """Hermitian (not positive) blocks with excited-state entries everywhere."""
    rng = np.random.default_rng(7)
    state = FamilyBlockState.zeros(small_grid)
    for blocks in (state.lambda_blocks, state.iw_blocks):
        a = rng.normal(size=blocks.shape) + 1j * rng.normal(size=blocks.shape)
        blocks[:] = 0.5 * (a + a.conj().transpose(0, 2, 1))
    return state


SMALL_DOCUMENT = {
    "grid": {"p_max": 4, "points_per_recoil": 5},
    "stages": [{"duration": 2, "omega_plus": 0.3, "omega_minus": 0.3, "delta": 0}],
    "observation_stride": 25,
    "seed_label": "small",
}


@pytest.fixture
def small_document() -> dict:
    return {**SMALL_DOCUMENT, "grid": dict(SMALL_DOCUMENT["grid"]), "stages": [dict(s) for s in SMALL_DOCUMENT["stages"]]}


@pytest.fixture
def small_config(small_document):
    return merge_config(small_document)
