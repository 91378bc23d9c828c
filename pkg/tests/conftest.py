"""Shared fixtures for the cfzf test suite."""

import numpy as np
import pytest

from cfzf.channel import estimation_stats
from cfzf.pilots import assign_pilots_random, group_ues
from cfzf.power import full_power
from cfzf.scenario import ScenarioConfig, generate_network


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow Monte-Carlo acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


class Drop:
    """A fully prepared network drop."""

    def __init__(self, L, N, K, tau_p, seed=7, v_percent=85.0, area_m=1000.0, shadow=4.0):
        self.config = ScenarioConfig.from_dict({
            'L': L, 'N': N, 'K': K, 'tau_p': tau_p, 'area_m': area_m,
            'v_percent': v_percent, 'seed': seed,
            'pathloss': {'shadow_sigma_dB': shadow},
        })
        rng = np.random.default_rng(seed)
        self.net = generate_network(self.config, rng)
        self.pa = assign_pilots_random(K, tau_p, rng)
        self.ga = group_ues(self.net, self.pa, v_percent, n_antennas=N)
        self.powers = full_power(K, self.config.p_max_W).p_ul
        self.stats = estimation_stats(self.net, self.pa, self.config.pilot_power_W)
        self.N = N


@pytest.fixture
def make_drop():
    return Drop


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
