import numpy as np
import pytest

from cfzf.channel import draw_block, estimation_stats
from cfzf.pilots import PilotAssignment
from cfzf.scenario import NetworkRealization


def _net(beta, sigma2):
    beta = np.asarray(beta, dtype=float)
    K, L = beta.shape
    return NetworkRealization(ap_positions=np.zeros((L, 2)), ue_positions=np.zeros((K, 2)),
                              beta=beta, sigma2=sigma2)


def test_lone_user_unit_values():
    stats = estimation_stats(_net([[1.0]], 1.0), PilotAssignment.from_indices([0], 1), 1.0)
    assert stats.c[0, 0] == pytest.approx(0.5)
    assert stats.gamma[0, 0] == pytest.approx(0.5)
    assert stats.theta[0, 0] == pytest.approx(2.0)


def test_noiseless_estimate_is_perfect():
    stats = estimation_stats(_net([[0.3]], 1e-15), PilotAssignment.from_indices([0], 1), 1.0)
    assert stats.gamma[0, 0] == pytest.approx(0.3, rel=1e-9)


def test_equal_copilots_share_the_estimate_power():
    stats = estimation_stats(_net([[1.0], [1.0]], 1.0), PilotAssignment.from_indices([0, 0], 1), 1.0)
    # gamma = p tau beta^2 / (tau (p beta + p beta) + sigma2) = 1/3
    np.testing.assert_allclose(stats.gamma[:, 0], [1 / 3, 1 / 3])
    assert stats.gamma[0, 0] < 0.5


def test_unused_pilot_holds_noise_only():
    stats = estimation_stats(_net([[1.0]], 0.25), PilotAssignment.from_indices([1], 3), 1.0)
    assert stats.theta[0, 0] == 0.25
    assert stats.theta[2, 0] == 0.25
    assert stats.theta[1, 0] == pytest.approx(3.25)


def test_statistics_identities(make_drop):
    drop = make_drop(L=6, N=8, K=10, tau_p=4)
    stats, pa = drop.stats, drop.pa
    np.testing.assert_allclose(stats.theta[pa.pilot_index], stats.gamma / stats.c ** 2, rtol=1e-12)
    p = drop.config.pilot_power_W
    np.testing.assert_allclose(stats.gamma, np.sqrt(p * 4) * drop.net.beta * stats.c, rtol=1e-12)
    assert np.all(stats.gamma > 0)
    assert np.all(stats.gamma < drop.net.beta)


def test_estimate_is_scaled_basis_column(make_drop, rng):
    drop = make_drop(L=5, N=8, K=9, tau_p=4)
    ws = draw_block(drop.net, drop.pa, drop.stats, rng, drop.N)
    assert ws.h.shape == ws.hhat.shape == (9, 5, 8)
    assert ws.Hbar.shape == (5, 8, 4)
    for k in range(9):
        for l in range(5):
            np.testing.assert_allclose(
                ws.hhat[k, l], drop.stats.c[k, l] * ws.Hbar[l, :, drop.pa.pilot_index[k]], rtol=1e-14)


def test_copilot_estimates_are_parallel(make_drop, rng):
    drop = make_drop(L=5, N=8, K=10, tau_p=3)
    ws = draw_block(drop.net, drop.pa, drop.stats, rng, drop.N)
    beta, p = drop.net.beta, drop.stats.p_pilot
    for k in range(10):
        for t in drop.pa.copilot_sets[k]:
            ratio = (np.sqrt(p[k]) * beta[k]) / (np.sqrt(p[t]) * beta[t])
            np.testing.assert_allclose(ws.hhat[k], ratio[:, None] * ws.hhat[t], rtol=1e-10)


def test_empirical_moments_match_statistics():
    net = _net([[1.0, 0.2], [0.5, 0.8], [0.3, 0.05]], 0.1)
    pa = PilotAssignment.from_indices([0, 1, 0], 2)
    stats = estimation_stats(net, pa, [1.0, 0.5, 2.0])
    rng = np.random.default_rng(5)
    N, draws = 8, 20000

    hhat_power = np.zeros((3, 2))
    h_power = np.zeros((3, 2))
    cross = np.zeros((3, 2), dtype=complex)
    basis_power = np.zeros((2, 2))
    for _ in range(draws):
        ws = draw_block(net, pa, stats, rng, N)
        hhat_power += np.mean(np.abs(ws.hhat) ** 2, axis=2)
        h_power += np.mean(np.abs(ws.h) ** 2, axis=2)
        cross += np.mean(ws.hhat.conj() * (ws.h - ws.hhat), axis=2)
        basis_power += np.mean(np.abs(ws.Hbar) ** 2, axis=1)

    np.testing.assert_allclose(hhat_power / draws, stats.gamma, rtol=0.02)
    np.testing.assert_allclose(h_power / draws, net.beta, rtol=0.02)
    np.testing.assert_allclose(basis_power.T / draws, stats.theta, rtol=0.02)
    assert np.all(np.abs(cross / draws) < 0.02 * net.beta)


def test_scaled_workspace(make_drop, rng):
    drop = make_drop(L=3, N=8, K=4, tau_p=4)
    ws = draw_block(drop.net, drop.pa, drop.stats, rng, drop.N)
    scaled = ws.scaled(2j)
    np.testing.assert_allclose(scaled.hhat, 2j * ws.hhat)
    assert scaled.N == 8
