import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import OMEGA_Q, continuum_sum_f2_closed_form
from polaron_reset.bath import BathDiscretization, SpectralDensityParams, discretize
from polaron_reset.polaron import (ConvergenceError, PolaronState, correlation_profile,
                                   energy_gradient, excited_population, fixed_point_residual,
                                   ground_state, population_from_sum, variational_energy)

SINGLE = BathDiscretization.from_modes([OMEGA_Q], [OMEGA_Q])


def test_zero_coupling_gives_zero_displacements():
    bath = BathDiscretization.from_modes([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    for sc in (False, True):
        assert np.all(ground_state(bath, OMEGA_Q, self_consistent=sc).displacements == 0)


def test_single_mode_weak_coupling():
    state = ground_state(SINGLE, OMEGA_Q)
    assert state.displacements[0] == pytest.approx(-0.25)


def test_default_population(default_bath):
    p = excited_population(ground_state(default_bath, OMEGA_Q))
    expected = 0.5 * (1 - np.exp(-2 * continuum_sum_f2_closed_form()))
    assert p == pytest.approx(expected, rel=5e-3)
    assert p == pytest.approx(2.88e-3, rel=5e-3)


def test_self_consistent_close_to_weak(default_bath):
    weak = ground_state(default_bath, OMEGA_Q)
    sc = ground_state(default_bath, OMEGA_Q, self_consistent=True)
    assert abs(sc.sum_abs2 / weak.sum_abs2 - 1) < 0.01
    assert np.max(fixed_point_residual(sc, default_bath, OMEGA_Q)) < 1e-12


def test_non_convergence_reports_residual(default_bath):
    with pytest.raises(ConvergenceError) as info:
        ground_state(default_bath, OMEGA_Q, self_consistent=True, tol=1e-300, max_iter=3)
    assert info.value.residual > 0


def test_population_limits():
    assert population_from_sum(0.0) == 0.0
    assert population_from_sum(1e4) == pytest.approx(0.5)
    assert excited_population(PolaronState(np.zeros(4))) == 0.0


@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=2, max_size=20))
def test_population_monotone_in_sum(sums):
    s = np.sort(np.asarray(sums))
    p = population_from_sum(s)
    assert np.all(np.diff(p) >= 0)
    assert np.all((p >= 0) & (p <= 0.5))


def test_energy_at_zero_displacement():
    bath = discretize(SpectralDensityParams(), 50)
    assert variational_energy(PolaronState.zeros(bath), OMEGA_Q, bath) == pytest.approx(-OMEGA_Q / 2)


def test_energy_single_mode_hand_value():
    e = variational_energy(PolaronState([-0.25]), OMEGA_Q, SINGLE)
    expected = -(OMEGA_Q / 2) * np.exp(-1 / 8) + OMEGA_Q / 16 - OMEGA_Q / 4
    assert e == pytest.approx(expected, rel=1e-14)


def test_ground_state_lowers_energy(default_bath):
    e0 = variational_energy(PolaronState.zeros(default_bath), OMEGA_Q, default_bath)
    for sc in (False, True):
        eg = variational_energy(ground_state(default_bath, OMEGA_Q, sc), OMEGA_Q, default_bath)
        assert eg <= e0 + 1e-12
    # the self-consistent point is the stationary point, hence lower still
    e_weak = variational_energy(ground_state(default_bath, OMEGA_Q), OMEGA_Q, default_bath)
    e_sc = variational_energy(ground_state(default_bath, OMEGA_Q, True), OMEGA_Q, default_bath)
    assert e_sc <= e_weak + 1e-12


def _fd_gradient(f, h_x, bath, step=1e-6):
    gx, gy = np.empty(f.size), np.empty(f.size)
    for k in range(f.size):
        for out, d in ((gx, step), (gy, 1j * step)):
            fp, fm = f.copy(), f.copy()
            fp[k] += d
            fm[k] -= d
            ep = variational_energy(PolaronState(fp), h_x, bath)
            em = variational_energy(PolaronState(fm), h_x, bath)
            out[k] = (ep - em) / (2 * step)
    return gx, gy


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_energy_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    bath = BathDiscretization.from_modes(np.sort(rng.uniform(1, 60, 6)), rng.uniform(0.5, 3, 6))
    f = rng.normal(scale=0.2, size=6) + 1j * rng.normal(scale=0.2, size=6)
    dx, dy = energy_gradient(PolaronState(f), OMEGA_Q, bath)
    fx, fy = _fd_gradient(f, OMEGA_Q, bath)
    scale = np.max(np.abs(np.concatenate([dx, dy])))
    assert np.max(np.abs(dx - fx)) / scale < 1e-6
    assert np.max(np.abs(dy - fy)) / scale < 1e-6


def test_gradient_vanishes_at_self_consistent_point(default_bath):
    sc = ground_state(default_bath, OMEGA_Q, self_consistent=True)
    dx, dy = energy_gradient(sc, OMEGA_Q, default_bath)
    assert np.max(np.abs(dx)) < 1e-9 and np.max(np.abs(dy)) == 0


def test_correlation_profile(default_bath):
    w, gf = correlation_profile(PolaronState.zeros(default_bath), default_bath)
    assert np.all(gf == 0)
    w, gf = correlation_profile(ground_state(default_bath, OMEGA_Q), default_bath)
    assert np.all(gf.imag == 0) and np.all(gf.real <= 0)
    peak = int(np.argmax(np.abs(gf)))
    assert 0 < peak < default_bath.n_modes - 1
    assert np.abs(gf[0]) < 1e-3 * np.abs(gf[peak]) and np.abs(gf[-1]) < 1e-3 * np.abs(gf[peak])


def test_correlation_profile_density_shape(default_bath):
    # per unit frequency, g_k f_k / w_k = -J(w) / (2 (w_q + w)) exactly
    from polaron_reset.bath import spectral_density
    from scipy.special import roots_legendre
    _, w = roots_legendre(default_bath.n_modes)
    weights = 0.5 * default_bath.omega_max * w
    _, gf = correlation_profile(ground_state(default_bath, OMEGA_Q), default_bath)
    density = gf.real / weights
    expected = -spectral_density(default_bath.omegas, default_bath.params) / (2 * (OMEGA_Q + default_bath.omegas))
    np.testing.assert_allclose(density, expected, rtol=1e-12)


def test_state_length_checked(default_bath):
    with pytest.raises(ValueError):
        variational_energy(PolaronState([0.1, 0.2]), OMEGA_Q, default_bath)
