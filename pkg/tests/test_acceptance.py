"""Acceptance gate: one PASS/FAIL line per criterion, summarised at the end of the run.

Tolerances are the contract values; nothing here is tuned to the implementation.
"""
import time

import numpy as np
import pytest
from scipy import integrate

from polaron_reset import lqr, oracle
from polaron_reset.bath import BathDiscretization, SpectralDensityParams, discretize, spectral_density
from polaron_reset.polaron import (PolaronState, energy_gradient, excited_population,
                                   fixed_point_residual, ground_state, population_from_sum,
                                   variational_energy)
from polaron_reset.switching import SwitchProfile
from polaron_reset.tdvp import evolve, final_displacement_integral, lambda_profiles

OMEGA_Q = 2 * np.pi * 5.0
T_F = 0.4
DT = 1e-3

RESULTS = {}


def report(n, checks, elapsed, limit, detail):
    """Record the criterion outcome, then fail the test if any check failed."""
    checks = dict(checks)
    checks["runtime"] = limit is None or elapsed < limit
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    budget = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit else "")
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{budget}]"
    if failed:
        line += "  failed: " + ", ".join(failed)
    RESULTS[n] = line
    print(line)
    assert ok, line


def continuum_reference(params):
    """Independent adaptive quadrature of int J(w) / (4 (w + w_q)^2) dw."""
    val, _ = integrate.quad(lambda w: spectral_density(w, params) / (4 * (w + params.omega_q) ** 2),
                            0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def test_criterion_1_relaxed_population():
    params = SpectralDensityParams()
    t0 = time.perf_counter()
    bath = discretize(params, 2000)
    p = excited_population(ground_state(bath, OMEGA_Q))
    elapsed = time.perf_counter() - t0
    ref = float(population_from_sum(continuum_reference(params)))
    rel = abs(p - ref) / ref
    report(1, {"rel<0.5%": rel < 5e-3}, elapsed, 1.0,
           f"P+={p:.6e} reference={ref:.6e} rel={rel:.2e}")


def test_criterion_2_fixed_point():
    t0 = time.perf_counter()
    bath = discretize(SpectralDensityParams(), 2000)
    weak = ground_state(bath, OMEGA_Q)
    sc = ground_state(bath, OMEGA_Q, self_consistent=True)
    res = float(np.max(fixed_point_residual(sc, bath, OMEGA_Q)))
    elapsed = time.perf_counter() - t0
    diff = abs(sc.sum_abs2 - weak.sum_abs2) / weak.sum_abs2
    report(2, {"residual<=1e-12": res <= 1e-12, "sum diff<1%": diff < 1e-2}, elapsed, 1.0,
           f"max residual={res:.1e} sum|f|^2 change={diff:.2e}")


def test_criterion_3_smooth_switch():
    bath = discretize(SpectralDensityParams(), 2000)
    init = ground_state(bath, OMEGA_Q)
    p0 = excited_population(init)
    finals, slowest = {}, 0.0
    for prof in lambda_profiles([1.0, 1.5, 2.0, 2.5], T_F):
        t0 = time.perf_counter()
        finals[prof.lam] = evolve(init, bath, OMEGA_Q, prof, DT, store_modes=None).final_p_plus
        slowest = max(slowest, time.perf_counter() - t0)
    factor = p0 / finals[1.0]
    checks = {
        "lambda=1 factor in [30,300]": 30 <= factor <= 300,
        "lambda=2 in [1e-7,1e-6]": 1e-7 <= finals[2.0] <= 1e-6,
        "p(2)<p(1.5)<p(1)": finals[2.0] < finals[1.5] < finals[1.0],
        "p(2)<p(2.5)": finals[2.0] < finals[2.5],
    }
    detail = "factor(1)={:.1f} ".format(factor) + " ".join(
        f"P+(lam={k:g})={v:.3e}" for k, v in finals.items())
    report(3, checks, slowest, 10.0, detail)


@pytest.fixture(scope="module")
def coarse_solutions():
    bath = discretize(SpectralDensityParams(), 150)
    t0 = time.perf_counter()
    sols = {R: lqr.optimize(bath, OMEGA_Q, R, T_F, DT) for R in (1e-7, 1e-9, 1e-11)}
    return bath, sols, time.perf_counter() - t0


def test_criterion_4_lqr_headline(coarse_solutions):
    _, sols, elapsed = coarse_solutions
    p = {R: s.final_p_plus for R, s in sols.items()}
    crossings = lqr.zero_crossings(sols[1e-7].control)
    checks = {
        "R=1e-7 within x5 of 1e-6": 0.2e-6 <= p[1e-7] <= 5e-6,
        "monotone in R": p[1e-7] > p[1e-9] > p[1e-11],
        "zero crossing": crossings >= 1,
    }
    report(4, checks, elapsed, 300.0,
           " ".join(f"P+(R={R:g})={v:.3e}" for R, v in p.items()) + f" crossings(1e-7)={crossings}")


def test_criterion_5_optimality(coarse_solutions):
    bath, sols, _ = coarse_solutions
    t0 = time.perf_counter()
    system = lqr.build_system(bath, OMEGA_Q, DT)
    t_mid = (np.arange(400) + 0.5) * DT
    u2 = SwitchProfile.rational(2.0, T_F)(t_mid)
    rng = np.random.default_rng(20261019)
    beats, worst = True, np.inf
    for R, sol in sols.items():
        x0 = sol.states[0]
        j_opt = lqr.cost(system, sol.control, x0, R)
        beats &= j_opt <= lqr.cost(system, u2, x0, R)
        for _ in range(100):
            du = rng.normal(size=sol.control.size)
            du *= rng.uniform(0, 1e-3) / np.linalg.norm(du)
            worst = min(worst, lqr.cost(system, sol.control + du, x0, R) - j_opt)
    elapsed = time.perf_counter() - t0
    report(5, {"LQR cost <= lambda=2 cost": bool(beats), "no improvement beyond 1e-12": worst >= -1e-12},
           elapsed, 60.0, f"min J(u+du)-J(u) over 300 draws={worst:.3e}")


def test_criterion_6_analytic_cross_checks():
    t0 = time.perf_counter()
    omegas = np.array([0.3, 1.3, 2.9]) * OMEGA_Q
    bath = BathDiscretization.from_modes(omegas, [1.5, 2.0, 3.0])
    init = ground_state(bath, OMEGA_Q)
    worst = 0.0
    for lam in (1.0, 2.0):
        prof = SwitchProfile.rational(lam, T_F)
        rec = evolve(init, bath, OMEGA_Q, prof, DT, hold="quadratic", store_modes=None)
        for k, (w, g) in enumerate(zip(omegas, bath.couplings)):
            ref = final_displacement_integral((w, g), OMEGA_Q, prof)
            worst = max(worst, abs(rec.final_displacements[k] - ref) / abs(ref))
    lin_worst = 0.0
    for w in omegas:
        wp = w + OMEGA_Q
        expect = abs(1.0 / (2 * wp)) * abs(2 * np.sin(wp * T_F / 2) / (wp * T_F))
        got = abs(final_displacement_integral((w, 1.0), OMEGA_Q, SwitchProfile.linear(T_F)))
        lin_worst = max(lin_worst, abs(got - expect) / expect)
    elapsed = time.perf_counter() - t0
    report(6, {"evolve vs integral <1e-6": worst < 1e-6, "linear closed form <1e-10": lin_worst < 1e-10},
           elapsed, 1.0, f"endpoint rel err={worst:.2e} linear rel err={lin_worst:.2e}")


def test_criterion_7_oracle():
    t0 = time.perf_counter()
    bath = oracle.oracle_bath(3, 1e-3)
    series = oracle.coupling_halving_series(bath, OMEGA_Q, SwitchProfile.rational(2.0, 0.2), DT,
                                            fock_cutoff=6, halvings=2)
    elapsed = time.perf_counter() - t0
    disc = [c.relative_discrepancy for c in series]
    checks = {"within 20%": disc[0] < 0.2, "monotone under halving": disc[0] > disc[1] > disc[2],
              "no Fock leakage": all(c.valid for c in series)}
    report(7, checks, elapsed, 60.0, "discrepancy " + " ".join(f"{d:.2e}" for d in disc))


def _fd_check():
    rng = np.random.default_rng(7)
    bath = BathDiscretization.from_modes(np.sort(rng.uniform(1, 60, 8)), rng.uniform(0.5, 3, 8))
    f = rng.normal(scale=0.2, size=8) + 1j * rng.normal(scale=0.2, size=8)
    dx, dy = energy_gradient(PolaronState(f), OMEGA_Q, bath)
    h = 1e-6
    fd = []
    for k in range(f.size):
        for d in (h, 1j * h):
            fp, fm = f.copy(), f.copy()
            fp[k] += d
            fm[k] -= d
            fd.append((variational_energy(PolaronState(fp), OMEGA_Q, bath)
                       - variational_energy(PolaronState(fm), OMEGA_Q, bath)) / (2 * h))
    analytic = np.column_stack([dx, dy]).ravel()
    return float(np.max(np.abs(analytic - np.array(fd))) / np.max(np.abs(analytic)))


def test_criterion_8_hygiene():
    t0 = time.perf_counter()
    fd_err = _fd_check()

    small = discretize(SpectralDensityParams(), 8)
    sol = lqr.optimize(small, OMEGA_Q, 1e-9, T_F, DT, retain_P=True)
    probes = np.random.default_rng(8).normal(size=(64, 16))
    min_quad = min(float(np.min(np.einsum("ij,jk,ik->i", probes, P, probes))) for P in sol.P_history)

    bath = discretize(SpectralDensityParams(), 2000)
    init = ground_state(bath, OMEGA_Q)
    free = evolve(init, bath, OMEGA_Q, SwitchProfile.constant(T_F, 0.0), DT)
    norm_step = float(np.max(np.abs(np.diff(np.abs(free.displacements), axis=0))))

    prof = SwitchProfile.rational(2.0, T_F)
    a = evolve(init, bath, OMEGA_Q, prof, DT, store_modes=None).final_p_plus
    b = evolve(init, bath, OMEGA_Q, prof, DT / 2, store_modes=None).final_p_plus
    halving = abs(a - b) / b
    elapsed = time.perf_counter() - t0
    checks = {"gradient FD <1e-6": fd_err < 1e-6, "Riccati PSD": min_quad >= 0.0,
              "u=0 norm <1e-12/step": norm_step < 1e-12, "dt halving <0.1%": halving < 1e-3}
    report(8, checks, elapsed, None,
           f"fd={fd_err:.1e} min x'Px={min_quad:.2e} norm step={norm_step:.1e} dt-halving={halving:.2e}")
