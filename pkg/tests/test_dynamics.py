import warnings

import numpy as np
import pytest

from nf4nls.dynamics import (
    IntegrationError,
    IntegratorConfig,
    Scheme,
    burst_trajectory,
    fd_burst,
    integrate,
    random_initial_data,
    reconstruct_u,
    relative_drift,
    rhs_direct_oracle,
    rhs_interaction,
    step,
)
from nf4nls.spectral import Frame, SpectralField, mass, single_mode, zero_field


def rand_v(N, seed=0):
    rng = np.random.default_rng(seed)
    return SpectralField(Frame.INTERACTION_V, N, rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1))


@pytest.mark.parametrize("N", [1, 2, 5])
def test_rhs_matches_literal_sum(N):
    v = rand_v(N, N)
    for t in (0.0, 0.7):
        assert np.allclose(rhs_interaction(v, t).coeffs, rhs_direct_oracle(v, t).coeffs, rtol=1e-11, atol=1e-11)


def test_rhs_rejects_wrong_frame():
    with pytest.raises(ValueError):
        rhs_interaction(zero_field(2, Frame.PHYSICAL_U), 0.0)


def test_zero_data_stays_zero():
    traj = integrate(zero_field(4), IntegratorConfig(4, 1e-3, 0.01))
    assert all(not np.any(f.coeffs) for f in traj.fields)


def test_free_flow_is_constant_in_interaction_frame():
    v0 = rand_v(3)
    traj = integrate(v0, IntegratorConfig(3, 1e-3, 0.05, coupling=0.0))
    assert np.array_equal(traj.fields[-1].coeffs, v0.coeffs)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_single_mode_exact_solution(scheme):
    # u = a e^{ikx} e^{-i(k^4 + |a|^2) t}, so v_k = a e^{i |a|^2 t}
    a, k, T = 0.8, 2, 0.2
    v0 = single_mode(3, k, a)
    dt = 1e-3 if scheme is Scheme.IF_RK4 else 2e-4
    traj = integrate(v0, IntegratorConfig(3, dt, T, scheme))
    assert traj.fields[-1].coeff(k) == pytest.approx(a * np.exp(1j * a * a * T), abs=1e-9)
    t, u = reconstruct_u(traj)[-1]
    assert u.frame is Frame.PHYSICAL_U
    assert u.coeff(k) == pytest.approx(a * np.exp(-1j * (k**4 + a * a) * T), abs=1e-8)


def test_schemes_agree():
    v0 = random_initial_data(4, 2.0, 1)
    a = integrate(v0, IntegratorConfig(4, 1e-4, 0.02)).fields[-1].coeffs
    b = integrate(v0, IntegratorConfig(4, 1e-5, 0.02, Scheme.RK4_DIRECT)).fields[-1].coeffs
    assert np.allclose(a, b, atol=1e-9)


def test_fourth_order_convergence():
    v0 = random_initial_data(3, 1.0, 2)
    ref = integrate(v0, IntegratorConfig(3, 1e-4, 0.1)).fields[-1].coeffs
    errs = [np.max(np.abs(integrate(v0, IntegratorConfig(3, dt, 0.1)).fields[-1].coeffs - ref))
            for dt in (4e-3, 2e-3)]
    assert 12 < errs[0] / errs[1] < 20


def test_backward_integration_returns():
    v0 = random_initial_data(3, 1.0, 3)
    fw = integrate(v0, IntegratorConfig(3, 1e-4, 0.01)).fields[-1]
    back = integrate(fw, IntegratorConfig(3, 1e-4, 0.0)).fields[-1]
    assert back.time == 0.0
    assert np.allclose(back.coeffs, v0.coeffs, atol=1e-12)


def test_recording_and_final_time():
    traj = integrate(rand_v(2), IntegratorConfig(2, 0.003, 0.0305, record_every=4))
    assert traj.times[-1] == 0.0305
    assert traj.times[0] == 0.0
    # round(0.0305 / 0.003) = 10 steps of 0.00305, recorded at steps 4, 8 and 10
    assert len(traj) == len(traj.times) == 4
    assert np.allclose(traj.times, [0.0, 0.0122, 0.0244, 0.0305])
    assert set(traj.diagnostics) == {"mass", "hamiltonian", "hs_norm"}


def test_step_matches_integrate():
    v0 = rand_v(2, 5)
    cfg = IntegratorConfig(2, 1e-3, 1e-3)
    assert np.allclose(step(v0, 0.0, 1e-3, cfg).coeffs, integrate(v0, cfg).fields[-1].coeffs)


def test_blowup_raises_with_step_index():
    v0 = SpectralField(Frame.INTERACTION_V, 1, [0, 1e110, 0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(IntegrationError) as info:
            integrate(v0, IntegratorConfig(1, 1e-3, 0.01))
    assert info.value.step_index == 1


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(2, 0.0, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(2, 0.1, 1.0, record_every=0)
    with pytest.raises(ValueError):
        integrate(rand_v(2), IntegratorConfig(3, 0.1, 1.0))


def test_smooth_data_conserves_mass_and_energy():
    v0 = random_initial_data(16, 5.0, 0)
    d = integrate(v0, IntegratorConfig(16, 1e-4, 0.1, record_every=100)).diagnostics
    assert relative_drift(d["mass"]) < 1e-10
    assert relative_drift(d["hamiltonian"]) < 1e-7


def test_random_data_is_nested_and_normalised():
    big = random_initial_data(8, 0.6, 4, N_draw=8)
    small = random_initial_data(4, 0.6, 4, N_draw=8)
    assert mass(big) == pytest.approx(1.0) and mass(small) == pytest.approx(1.0)
    ratio = small.coeffs / big.coeffs[4:13]
    assert np.allclose(ratio, ratio[0])
    with pytest.raises(ValueError):
        random_initial_data(8, 0.6, 0, N_draw=4)
    assert not np.allclose(random_initial_data(4, 0.6, 0, index=1).coeffs, random_initial_data(4, 0.6, 0).coeffs)


def test_bursts_are_uniform_stencils():
    v = integrate(rand_v(2), IntegratorConfig(2, 1e-3, 0.01)).fields[-1]
    b = fd_burst(v, 1e-4)
    assert np.allclose(np.diff([f.time for f in b]), 1e-4)
    assert b[2] is v
    traj = burst_trajectory([v, v.replace(time=0.02)], 1e-4)
    assert len(traj) == 10
