import dataclasses

import numpy as np
import pytest
from scipy.optimize import brentq

from cfzf.channel import estimation_stats
from cfzf.closedform import (ClosedFormInputs, FixedPointError, closed_form_report,
                             closed_form_se, closed_form_sinr_at, closed_form_terms,
                             fzf_se_closed, has_closed_form, mlrzf_asymptotic_se,
                             mlrzf_asymptotic_terms,
                             mlrzf_fixed_point, mlrzf_fixed_points, pfzf_se_closed,
                             pwpfzf_se_closed)
from cfzf.combining import Scheme
from cfzf.lsfd import Method, accumulate_moments, monte_carlo_report
from cfzf.pilots import PilotAssignment, all_strong, all_weak, group_ues


def _inputs(drop, pa=None, ga=None):
    pa = drop.pa if pa is None else pa
    stats = estimation_stats(drop.net, pa, drop.config.pilot_power_W)
    if ga is None:
        ga = group_ues(drop.net, pa, drop.config.v_percent, n_antennas=drop.N)
    return ClosedFormInputs(stats=stats, pa=pa, ga=ga, powers=drop.powers,
                            sigma2=drop.net.sigma2, N=drop.N, tau_p=pa.tau_p)


def test_fzf_single_ap_scalar_formula(make_drop):
    drop = make_drop(L=1, N=8, K=4, tau_p=4)
    inp = _inputs(drop, pa=PilotAssignment.from_indices([0, 1, 2, 3], 4))
    gamma, beta = inp.stats.gamma[:, 0], drop.net.beta[:, 0]
    p, sigma2 = drop.powers, drop.net.sigma2
    leakage = np.sum(p * (beta - gamma))
    for k in range(4):
        a, sinr, se = fzf_se_closed(inp, k)
        expected = 4 * p[k] * gamma[k] ** 2 / (gamma[k] * leakage + sigma2 * gamma[k])
        assert sinr == pytest.approx(expected, rel=1e-10)
        assert se == pytest.approx(0.98 * np.log2(1 + expected), rel=1e-10)
        assert a.shape == (1,)


def test_vanishing_estimates_vanish_the_sinr(make_drop):
    drop = make_drop(L=5, N=8, K=6, tau_p=3)
    inp = _inputs(drop)
    base = fzf_se_closed(inp, 0)[1]
    faint = dataclasses.replace(inp, stats=dataclasses.replace(inp.stats, gamma=inp.stats.gamma * 1e-9))
    assert fzf_se_closed(faint, 0)[1] < 1e-6 * base


def test_all_strong_partial_schemes_equal_fzf(make_drop):
    drop = make_drop(L=6, N=8, K=10, tau_p=7)
    pa = PilotAssignment.from_indices([0, 1, 2, 3, 4, 5, 6, 0, 1, 2], 7)
    inp = _inputs(drop, pa=pa, ga=all_strong(pa, 6))
    for k in range(10):
        fzf = fzf_se_closed(inp, k)
        for partial in (pfzf_se_closed(inp, k), pwpfzf_se_closed(inp, k)):
            assert partial[1] == fzf[1]
            assert partial[2] == fzf[2]
            assert np.array_equal(partial[0], fzf[0])


def test_all_weak_partial_schemes_coincide(make_drop):
    drop = make_drop(L=6, N=8, K=10, tau_p=7)
    inp = _inputs(drop, ga=all_weak(drop.pa, 6))
    for k in range(10):
        b1, C1 = closed_form_terms(inp, Scheme.PFZF, k)
        b2, C2 = closed_form_terms(inp, Scheme.PWPFZF, k)
        np.testing.assert_allclose(b1, 8 * inp.stats.gamma[k])
        np.testing.assert_allclose(b2, b1)
        np.testing.assert_allclose(C2, C1)


def test_all_weak_matches_monte_carlo_mr(make_drop):
    drop = make_drop(L=4, N=8, K=4, tau_p=2, area_m=300.0)
    inp = _inputs(drop, ga=all_weak(drop.pa, 4))
    closed = np.array([pfzf_se_closed(inp, k)[2] for k in range(4)])
    m = accumulate_moments(Scheme.MR, drop.net, drop.pa, inp.stats, drop.powers, drop.N, 4000,
                           np.random.SeedSequence(entropy=99, spawn_key=(0, 0, 2)),
                           chunk_trials=500)
    mc = monte_carlo_report(m, drop.powers, drop.net.sigma2, 2, 200, "MR", "full").se
    assert mc.sum() == pytest.approx(closed.sum(), rel=0.05)


def test_optimal_weights_upper_bound_any_weights(make_drop):
    drop = make_drop(L=5, N=8, K=8, tau_p=4)
    inp = _inputs(drop)
    rng = np.random.default_rng(0)
    for scheme in (Scheme.FZF, Scheme.PFZF, Scheme.PWPFZF):
        for k in range(8):
            a, best, _ = closed_form_se(inp, scheme, k)
            assert closed_form_sinr_at(inp, scheme, k, a) == pytest.approx(best, rel=1e-9)
            assert closed_form_sinr_at(inp, scheme, k, 3.7 * a) == pytest.approx(best, rel=1e-9)
            for _ in range(20):
                other = rng.standard_normal(5)
                assert closed_form_sinr_at(inp, scheme, k, other) <= best * (1 + 1e-9)


def test_partial_schemes_differ_only_on_weak_aps(make_drop):
    drop = make_drop(L=8, N=8, K=10, tau_p=5)
    inp = _inputs(drop)
    weak = ~inp.ga.is_strong
    for k in range(10):
        b_p, C_p = closed_form_terms(inp, Scheme.PFZF, k)
        b_w, C_w = closed_form_terms(inp, Scheme.PWPFZF, k)
        d = drop.N - inp.ga.tau_S
        np.testing.assert_allclose(b_w[weak[k]], (d * inp.stats.gamma[k])[weak[k]])
        np.testing.assert_allclose(b_p[weak[k]], (drop.N * inp.stats.gamma[k])[weak[k]])
        np.testing.assert_allclose(b_w[~weak[k]], b_p[~weak[k]])
        np.testing.assert_allclose(np.diag(C_w)[~weak[k]], np.diag(C_p)[~weak[k]])


def test_closed_form_rejects_missing_groups_and_short_arrays(make_drop):
    drop = make_drop(L=3, N=8, K=6, tau_p=4)
    inp = dataclasses.replace(_inputs(drop), ga=None)
    with pytest.raises(ValueError):
        pfzf_se_closed(inp, 0)
    short = dataclasses.replace(_inputs(drop), N=4)
    with pytest.raises(ValueError):
        fzf_se_closed(short, 0)
    with pytest.raises(ValueError):
        closed_form_se(_inputs(drop), Scheme.MR, 0)


@pytest.mark.parametrize("scheme", [Scheme.FZF, Scheme.PFZF, Scheme.PWPFZF])
def test_closed_form_tracks_monte_carlo(make_drop, scheme):
    drop = make_drop(L=6, N=8, K=6, tau_p=4, area_m=300.0)
    inp = _inputs(drop)
    closed = closed_form_report(inp, scheme, "full").se
    m = accumulate_moments(scheme, drop.net, drop.pa, inp.stats, drop.powers, drop.N, 3000,
                           np.random.SeedSequence(entropy=5, spawn_key=(0, 0, 2)),
                           ga=inp.ga, chunk_trials=500)
    mc = monte_carlo_report(m, drop.powers, drop.net.sigma2, 4, 200, scheme.value, "full").se
    assert mc.sum() == pytest.approx(closed.sum(), rel=0.05)


def test_scalar_fixed_point_matches_root_finding():
    for theta, N, alpha in ((2.0, 16, 0.8), (50.0, 8, 0.1), (0.3, 64, 2.0)):
        state = mlrzf_fixed_point(np.array([theta]), N, alpha)
        root = brentq(lambda e: e - theta / (theta / (N * (1 + e)) + alpha), 0.0, theta / alpha,
                      xtol=1e-14)
        assert state.e[0] == pytest.approx(root, rel=1e-6)
        assert state.residual < 1e-9
        assert state.spectral_radius < 1


def test_heavy_regularization_shrinks_the_fixed_point():
    theta = np.array([2.0, 0.5, 7.0])
    state = mlrzf_fixed_point(theta, 16, 1e6)
    np.testing.assert_allclose(state.e, theta / 1e6, rtol=1e-5)


def test_fixed_point_derivatives():
    theta = np.array([30.0, 4.0, 0.2, 11.0])
    state = mlrzf_fixed_point(theta, 16, 0.8)
    assert np.all(state.e > 0)
    assert 0 <= state.spectral_radius < 1
    for j in range(4):
        np.testing.assert_allclose(state.e_cross[:, j], theta[j] * state.e_prime, rtol=1e-10)
    T = 1.0 / (np.sum(theta / (1 + state.e)) / 16 + 0.8)
    np.testing.assert_allclose(state.e, theta * T, rtol=1e-6)


def test_fixed_point_failures():
    with pytest.raises(FixedPointError) as info:
        mlrzf_fixed_point(np.array([40.0, 3.0]), 8, 0.8, max_iter=1)
    assert info.value.residual > 0
    with pytest.raises(ValueError):
        mlrzf_fixed_point(np.array([1.0]), 8, 0.0)


def test_mlrzf_asymptotic_se(make_drop):
    drop = make_drop(L=4, N=16, K=16, tau_p=8)
    inp = _inputs(drop)
    fps = mlrzf_fixed_points(inp.stats, 16, 0.8)
    assert len(fps) == 4
    for k in range(16):
        a, sinr, se = mlrzf_asymptotic_se(fps, inp, k)
        assert sinr > 0
        assert se == pytest.approx((1 - 8 / 200) * np.log2(1 + sinr))
        _, sinr_scaled, _ = mlrzf_asymptotic_se(fps, inp, k, a=2.5 * a)
        assert sinr_scaled == pytest.approx(sinr, rel=1e-9)
        _, sinr_flat, _ = mlrzf_asymptotic_se(fps, inp, k, a=np.ones(4))
        assert sinr_flat <= sinr * (1 + 1e-9)


def test_closed_form_report(make_drop):
    drop = make_drop(L=4, N=16, K=8, tau_p=4)
    inp = _inputs(drop)
    report = closed_form_report(inp, Scheme.PWPFZF, "full", "digest")
    assert report.method is Method.CLOSED_FORM
    assert report.scheme == "PWPFZF"
    assert report.config_digest == "digest"
    assert report.sinr.shape == (8,)
    np.testing.assert_allclose(report.se, report.prelog * np.log2(1 + report.sinr))

    asymptotic = closed_form_report(inp, Scheme.MLRZF, "full")
    assert asymptotic.method is Method.ASYMPTOTIC
    assert np.all(asymptotic.sinr > 0)

    assert has_closed_form(Scheme.FZF) and has_closed_form(Scheme.MLRZF)
    assert not has_closed_form(Scheme.MR) and not has_closed_form(Scheme.LRZF)


def test_mlrzf_estimation_error_enters_through_combiner_power(make_drop):
    drop = make_drop(L=4, N=16, K=16, tau_p=8)
    inp = _inputs(drop)
    fps = mlrzf_fixed_points(inp.stats, 16, 0.8)
    k = 0
    t = int(np.flatnonzero(inp.pa.pilot_index != inp.pa.pilot_index[k])[0])
    delta = 0.5 * inp.stats.beta[t]
    beta = inp.stats.beta.copy()
    beta[t] += delta
    noisier = dataclasses.replace(inp, stats=dataclasses.replace(inp.stats, beta=beta))

    _, C, _ = mlrzf_asymptotic_terms(fps, inp, k)
    _, C_noisier, _ = mlrzf_asymptotic_terms(fps, noisier, k)

    ik = inp.pa.pilot_index[k]
    c = inp.stats.c[k] * np.sqrt(inp.sigma2)
    e = np.array([fp.e[ik] for fp in fps])
    ep = np.array([fp.e_prime[ik] for fp in fps])
    p_t = drop.powers[t] / inp.sigma2
    expected = p_t * delta * ep / 16 * c ** 2 / (1 + e) ** 2
    np.testing.assert_allclose(np.diag(C_noisier) - np.diag(C), expected, rtol=1e-9)
    np.testing.assert_array_equal(C_noisier - np.diag(np.diag(C_noisier)), C - np.diag(np.diag(C)))
