import math

import numpy as np
import pytest

from nf4nls.gaussian import (
    E_E,
    E_EE,
    ResolutionError,
    check_resolution,
    critical_modulus,
    derivative_field,
    dispersionless_flow,
    flow_values,
    increment_variance,
    kakutani_converges,
    kakutani_divergence,
    kakutani_tail_slope,
    lil_breakdown_experiment,
    lil_ratio,
    lil_target,
    psi,
    sample_mu_s,
    sample_rng,
    tail_variance,
)


def test_streams_are_reproducible_and_distinct():
    a = sample_mu_s(1.0, 64, seed=3, M_samp=256, index=2)
    b = sample_mu_s(1.0, 64, seed=3, M_samp=256, index=2)
    c = sample_mu_s(1.0, 64, seed=3, M_samp=256, index=3)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert not np.allclose(a.coeffs, c.coeffs)
    assert sample_rng(3, 2).standard_normal() == sample_rng(3, 2).standard_normal()


def test_sampler_rejects_bad_parameters():
    with pytest.raises(ValueError):
        sample_mu_s(0.5, 16, M_samp=64)
    with pytest.raises(ValueError):
        sample_mu_s(1.0, 64, M_samp=100)


def test_gaussians_have_unit_component_variance():
    g = np.concatenate([sample_mu_s(1.0, 2048, seed=0, M_samp=8192, index=k).g for k in range(4)])
    assert np.mean(np.abs(g) ** 2) == pytest.approx(2.0, rel=0.03)
    assert np.var(g.real) == pytest.approx(1.0, rel=0.05)


def test_grid_values_match_direct_sum():
    smp = sample_mu_s(1.2, 40, seed=1, M_samp=128)
    x = smp.grid[::9]
    assert np.allclose(smp.grid_values[::9], smp.evaluate(x))


def test_tail_variance_matches_explicit_sum():
    s, N = 1.0, 100
    n = np.arange(N + 1, 10**6 + 1, dtype=float)
    explicit = 4 * np.sum(1 / (1 + n * n)) + 4 / (10**6)
    assert tail_variance(s, N) == pytest.approx(explicit, rel=1e-4)


def test_derivative_field_guard_and_coefficients():
    smp = sample_mu_s(2.0, 32, seed=2, M_samp=128)
    d = derivative_field(smp, 1)
    assert np.allclose(d.coeffs, 1j * smp.n * smp.coeffs)
    assert d.effective_s == 1.0
    with pytest.raises(ValueError):
        derivative_field(sample_mu_s(1.0, 32, M_samp=128), 1)
    with pytest.raises(ValueError):
        derivative_field(d, 1)  # total order 2 needs s > 5/2


def test_dispersionless_flow_solves_the_ode():
    u = sample_mu_s(1.0, 64, M_samp=256).grid_values
    t, h = 0.8, 1e-5
    w = dispersionless_flow(u, t)
    assert np.allclose(np.abs(w), np.abs(u))
    dw = (flow_values(u, t + h) - flow_values(u, t - h)) / (2 * h)
    assert np.allclose(1j * dw, np.abs(w) ** 2 * w, rtol=1e-5, atol=1e-5)


def test_modulus_domains():
    assert psi(E_E) == pytest.approx(math.sqrt(2 * E_E))
    for bad in (0.0, 0.1, -1.0):
        with pytest.raises(ValueError):
            psi(bad)
    with pytest.raises(ValueError):
        critical_modulus(E_EE)
    with pytest.raises(ValueError):
        critical_modulus(2.0**-20)  # e^-e^e is about 2.6e-7
    h = 2.0**-24
    L = math.log(1 / h)
    assert critical_modulus(h) == pytest.approx(2**1.5 * h * math.sqrt(L * math.log(math.log(L))))


def test_increment_variance_closed_form():
    # for s = 1: 2 sum_{n != 0} |1 - e^{inx}|^2 / (1 + n^2) = 4 pi (cosh pi - cosh(pi - x)) / sinh pi
    for x in (0.05, 0.5, 2.0):
        exact = 4 * math.pi * (math.cosh(math.pi) - math.cosh(math.pi - x)) / math.sinh(math.pi)
        assert increment_variance(1.0, x, 2**16) == pytest.approx(exact, rel=2e-3)


def test_real_increment_variance_by_monte_carlo():
    h = 0.05
    smps = [sample_mu_s(1.0, 256, seed=7, M_samp=1024, index=k) for k in range(600)]
    inc = [s.evaluate([1.0 + h])[0].real - s.evaluate([1.0])[0].real for s in smps]
    assert np.var(inc) == pytest.approx(smps[0].real_increment_variance(h)[0], rel=0.15)


def test_resolution_rule():
    check_resolution(2**16, 20)
    with pytest.raises(ResolutionError):
        check_resolution(2**10, 20)
    with pytest.raises(ResolutionError):
        lil_ratio(sample_mu_s(1.0, 2**8, M_samp=2**10), k_max=20)


def test_lil_ratio_without_flow_time_is_unchanged():
    smp = sample_mu_s(1.0, 2**12, M_samp=2**14)
    rep = lil_ratio(smp, k_max=16, t=0.0)
    assert np.array_equal(rep.ratios_pre, rep.ratios_post)
    assert len(rep.ratios_pre) == 13
    with pytest.raises(ValueError):
        lil_ratio(smp, k_min=10, k_max=5)


@pytest.mark.parametrize("normalizer", ["CLASSICAL", "FRACTIONAL"])
def test_lil_ratios_are_order_one(normalizer):
    maxima = [lil_ratio(sample_mu_s(1.0, 2**14, seed=5, M_samp=2**15 + 1, index=k), k_max=18,
                        normalizer=normalizer).max_pre for k in range(24)]
    assert 0.6 < np.median(maxima) < 1.4


def test_unknown_normalizer():
    with pytest.raises(ValueError):
        lil_ratio(sample_mu_s(1.0, 2**12, M_samp=2**14), k_max=16, normalizer="NOPE")


def test_lil_target():
    for k in (1, 2, 3):
        assert math.sin(lil_target(k) ** 2) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        lil_target(0)


def test_small_breakdown_experiment():
    rep = lil_breakdown_experiment(1.0, 1.0, lil_target(1), 0.5, 3000, seed=1, N_samp=2**12, k_max=16,
                                   baseline_samples=8, max_conditioned=6)
    assert rep.n_conditioned == 6
    assert {r[0] for r in rep.rows} >= set(range(8))  # unconditioned baseline
    M = lil_target(1)
    for k, cond, pre, post in rep.rows:
        u0 = sample_mu_s(1.0, 2**12, seed=1, M_samp=2**13 + 1, index=k).evaluate([math.pi])[0]
        assert cond == (abs(u0.real - M) <= 0.5 and abs(u0.imag) <= 0.5)
        assert pre > 0 and post > 0
    assert 0 <= rep.p_value <= 1
    assert rep.theta == pytest.approx(lil_target(1) ** 2)


def test_breakdown_without_hits_raises():
    with pytest.raises(ValueError):
        lil_breakdown_experiment(1.0, 1.0, lil_target(5), 1e-3, 5, seed=0, N_samp=2**12, k_max=16,
                                 baseline_samples=2)


def test_kakutani_dichotomy():
    n = np.arange(1, 20001, dtype=float)
    base = n**-2.0
    close = base * (1 + 1 / n)
    far = base * (1 + n**-0.5)
    assert kakutani_converges(base, close)
    assert not kakutani_converges(base, far)
    assert kakutani_tail_slope(base, close) == pytest.approx(-2.0, abs=0.05)
    assert kakutani_divergence(base, base) == 0.0
    with pytest.raises(ValueError):
        kakutani_divergence(base, base[:-1])
