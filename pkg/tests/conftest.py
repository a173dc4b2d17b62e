import numpy as np
import pytest

from diffthrust.aircraft import canonical_models
from diffthrust.config import load_config
from diffthrust.controllers import design_lqr, mrac_config
from diffthrust.simulator import Scenario, ScenarioKind, run_lqr, run_mrac


@pytest.fixture(scope="session")
def aircraft_config():
    return load_config()


@pytest.fixture(scope="session")
def models():
    return canonical_models()


@pytest.fixture(scope="session")
def design(models):
    return design_lqr(models[1])


@pytest.fixture(scope="session")
def adaptive(design):
    return mrac_config(design)


@pytest.fixture(scope="session")
def factor(aircraft_config):
    return aircraft_config.factor


@pytest.fixture(scope="session")
def lag_trace(design, adaptive, factor, aircraft_config):
    sc = Scenario(kind=ScenarioKind.MRAC_ENGINE_LAG)
    return run_mrac(sc, design, adaptive, factor, aircraft_config.engine, aircraft_config.limiter)


@pytest.fixture(scope="session")
def lqr_trace(design, adaptive, factor, aircraft_config):
    sc = Scenario(kind=ScenarioKind.LQR_CLOSED_LOOP)
    return run_lqr(sc, design, adaptive, factor, aircraft_config.engine, aircraft_config.limiter)


def random_stable(rng, n):
    a = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(a).real) + rng.uniform(0.1, 2.0)
    return a - shift * np.eye(n)
