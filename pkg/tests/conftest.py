import os

import pytest

from ucr.core import ScenarioConfig, db_to_linear
from ucr.montecarlo import TrialPlan
from ucr.partial import RayleighCqi

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# 16 dB primary and secondary links, |a11| = |a22| = 1, |a12| = |a21| = 0.1
P_16DB = db_to_linear(16.0)


@pytest.fixture
def fixture_path():
    def resolve(name):
        return os.path.join(FIXTURES, name)

    return resolve


@pytest.fixture
def full_cfg():
    return ScenarioConfig(
        gain2_11=1.0,
        gain2_12=0.01,
        gain2_22=1.0,
        gain2_21=0.01,
        p1=P_16DB,
        p2_local_max=P_16DB,
        rho=0.05,
    )


@pytest.fixture
def partial_cfg(full_cfg):
    return full_cfg.replace(gain2_21=None, mean_gain2=0.01)


@pytest.fixture
def tsmd_cfg(full_cfg):
    # strong cross link towards the secondary receiver, |a12|^2 = 4
    return full_cfg.replace(gain2_12=4.0)


@pytest.fixture
def rayleigh():
    return RayleighCqi(0.01)


@pytest.fixture
def small_plan():
    return TrialPlan(trials=200_000, seed=42, workers=1)
