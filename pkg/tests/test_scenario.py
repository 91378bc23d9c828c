import dataclasses

import numpy as np
import pytest

from cfzf.scenario import (PathlossModel, ScenarioConfig, generate_network, pathloss_db,
                           sigma2_from_dbm)


def test_pathloss_at_reference_distance_is_offset():
    model = PathlossModel()
    assert pathloss_db(1.0, model) == pytest.approx(model.offset_dB)


def test_pathloss_decade():
    model = PathlossModel(exponent=3.67)
    assert pathloss_db(10.0, model) == pytest.approx(model.offset_dB - 36.7)


def test_pathloss_at_100m():
    gain_db = pathloss_db(100.0, PathlossModel())
    assert gain_db == pytest.approx(-103.9)
    assert 10 ** (gain_db / 10) == pytest.approx(10 ** -10.39, rel=1e-12)


def test_pathloss_monotone_and_clamped():
    model = PathlossModel()
    d = np.array([0.2, 1.0, 3.0, 50.0, 400.0, 1500.0])
    gains = pathloss_db(d, model)
    assert np.all(np.diff(gains) <= 0)
    assert pathloss_db(0.2, model) == pathloss_db(1.0, model)


def test_shadowing_term_is_added():
    model = PathlossModel()
    assert pathloss_db(10.0, model, 3.0) == pytest.approx(pathloss_db(10.0, model) + 3.0)


def test_sigma2_from_dbm():
    assert sigma2_from_dbm(-94.0) == pytest.approx(10 ** -12.4)
    assert ScenarioConfig(L=1, N=1, K=1, tau_p=1).sigma2 == pytest.approx(10 ** -12.4)


def test_degenerate_network():
    config = ScenarioConfig(L=1, N=2, K=1, tau_p=1)
    net = generate_network(config, np.random.default_rng(0))
    assert net.beta.shape == (1, 1)
    assert net.beta[0, 0] > 0
    for positions in (net.ap_positions, net.ue_positions):
        assert np.all((positions >= 0) & (positions <= config.area_m))


def test_same_seed_same_network():
    config = ScenarioConfig(L=12, N=4, K=6, tau_p=3)
    a = generate_network(config, np.random.default_rng(99))
    b = generate_network(config, np.random.default_rng(99))
    assert np.array_equal(a.beta, b.beta)
    assert np.array_equal(a.ap_positions, b.ap_positions)
    assert np.array_equal(a.ue_positions, b.ue_positions)


def test_beta_follows_distance_without_shadowing():
    config = ScenarioConfig(L=8, N=4, K=5, tau_p=3,
                            pathloss=PathlossModel(shadow_sigma_dB=0.0))
    net = generate_network(config, np.random.default_rng(3))
    d = np.linalg.norm(net.ue_positions[:, None] - net.ap_positions[None], axis=-1)
    expected = 10 ** (pathloss_db(d, config.pathloss) / 10)
    np.testing.assert_allclose(net.beta, expected, rtol=1e-12)

    order = np.argsort(d.ravel())
    assert np.all(np.diff(net.beta.ravel()[order]) <= 0)


def test_config_problems():
    good = ScenarioConfig(L=4, N=8, K=10, tau_p=7)
    assert good.problems(zf_family=True) == []

    tight = dataclasses.replace(good, N=7)
    assert tight.problems(zf_family=False) == []
    assert any("tau_p + 1" in p for p in tight.problems(zf_family=True))

    bad = dataclasses.replace(good, v_percent=0.0, trials=0, p_max_W=-1.0)
    assert len(bad.problems()) == 3


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({'L': 1, 'N': 1, 'K': 1, 'tau_p': 1, 'antennas': 4})
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({'L': 1, 'N': 1, 'K': 1, 'tau_p': 1,
                                  'pathloss': {'slope': 3.0}})


def test_pilot_power_defaults_to_data_power():
    config = ScenarioConfig(L=1, N=1, K=1, tau_p=1, p_max_W=0.2)
    assert config.pilot_power_W == 0.2
    assert dataclasses.replace(config, p_pilot_W=0.05).pilot_power_W == 0.05
