from __future__ import annotations

import numpy as np
import pytest

from gywpanel.model import draw_stable_spec, simulate
from gywpanel.weights import scenario1_weights


@pytest.fixture(scope="session")
def w9():
    return scenario1_weights(9)


@pytest.fixture(scope="session")
def w25():
    return scenario1_weights(25)


@pytest.fixture(scope="session")
def spec9(w9):
    spec, _, _ = draw_stable_spec(w9, np.random.default_rng(20260817))
    return spec


@pytest.fixture(scope="session")
def series9(spec9):
    return simulate(spec9, 400, seed=np.random.SeedSequence([20260817, 1]))


@pytest.fixture(scope="session")
def spec25(w25):
    spec, _, _ = draw_stable_spec(w25, np.random.default_rng(31))
    return spec


@pytest.fixture(scope="session")
def series25(spec25):
    return simulate(spec25, 500, seed=np.random.SeedSequence([31, 1]))
