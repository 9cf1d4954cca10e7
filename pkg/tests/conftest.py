import numpy as np
import pytest

from posglab import model as modelmod


@pytest.fixture(scope="session")
def models():
    return modelmod.canonical_models()


@pytest.fixture(scope="session")
def canon2(models):
    return models["CANON2"]


@pytest.fixture(scope="session")
def fullobs3(models):
    return models["FULLOBS3"]


@pytest.fixture(scope="session")
def unctrl2(models):
    return models["UNCTRL2"]


@pytest.fixture(scope="session")
def separable2(models):
    return models["SEPARABLE2"]


@pytest.fixture(scope="session")
def single_state():
    return modelmod.build("ONE", np.ones((1, 1, 1, 1, 1)), np.zeros((1, 1, 1)), [1.0])
