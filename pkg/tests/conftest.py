import numpy as np
import pytest

from zeitlin.stream import build_blocks


@pytest.fixture(scope="session")
def blocks8():
    return build_blocks(8)


@pytest.fixture(scope="session")
def blocks16():
    return build_blocks(16)


@pytest.fixture(scope="session")
def blocks32():
    return build_blocks(32)


@pytest.fixture(autouse=True)
def _seed_numpy_legacy():
    # keep any stray legacy-API draws reproducible
    np.random.seed(0)
