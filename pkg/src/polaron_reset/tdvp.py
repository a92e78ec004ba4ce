"""Time-dependent polaron displacements under a switched coupling u(t).

Each displacement obeys ``df_k/dt = i f_k (w_q exp(-2 S) + w_k) + (i/2) g_k u(t)``
with ``S = sum |f_k|^2``. Dropping the exponential decouples the modes into
driven rotations at ``w'_k = w_k + w_q``, which are integrated exactly per step.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .bath import BathDiscretization
from .polaron import PolaronState, ground_state, population_from_sum
from .switching import SwitchProfile, UnsupportedProfileError

DEFAULT_DT = 1e-3
DEFAULT_T_F = 0.4
HOLDS = ("midpoint", "quadratic")


class IntegrationError(RuntimeError):
    pass


class ProfileError(ValueError):
    """The profile violates an assumption of the closed-form evaluation."""


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    u_values: np.ndarray
    p_plus: np.ndarray
    displacements: Optional[np.ndarray] = None  # (n_times, n_stored_modes)
    mode_indices: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None
    final_displacements: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        n = self.times.size
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name in ("u_values", "p_plus"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} is not aligned with times")
        if self.displacements is not None and self.displacements.shape[0] != n:
            raise ValueError("displacement snapshots are not aligned with times")

    @property
    def final_p_plus(self) -> float:
        return float(self.p_plus[-1])

    def mode(self, index: int) -> np.ndarray:
        """Stored trajectory of bath mode ``index``."""
        if self.displacements is None:
            raise KeyError("no displacement snapshots stored")
        if self.mode_indices is None:
            return self.displacements[:, index]
        hit = np.flatnonzero(self.mode_indices == index)
        if hit.size == 0:
            raise KeyError(f"mode {index} not stored")
        return self.displacements[:, hit[0]]


def step_grid(t_f: float, dt: float) -> Tuple[int, float]:
    """Number of steps and the uniform step that exactly tiles ``[0, t_f]``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt >= t_f:
        raise ValueError(f"dt={dt} must be smaller than t_f={t_f}")
    n = max(1, int(round(t_f / dt)))
    return n, t_f / n


def phi_functions(z: np.ndarray, k_max: int = 3) -> List[np.ndarray]:
    """``phi_k(z) = sum_n z^n / (n + k)!`` for ``k = 0..k_max``."""
    z = np.asarray(z, dtype=complex)
    out = [np.exp(z)]
    small = np.abs(z) < 1.0
    for k in range(1, k_max + 1):
        # recurrence is accurate away from zero; Taylor series near it
        with np.errstate(divide="ignore", invalid="ignore"):
            rec = (out[-1] - 1.0 / math.factorial(k - 1)) / z
        ser = np.zeros_like(z)
        term = np.full_like(z, 1.0 / math.factorial(k))
        for n in range(1, 30):
            ser += term
            term = term * z / (n + k)
        out.append(np.where(small, ser, rec))
    return out


def _forcing_weights(omega_p: np.ndarray, h: float, hold: str) -> np.ndarray:
    """Weights turning u samples within a step into ``int e^{i w'(h-s)} u(s) ds``.

    Rows correspond to the sample points (midpoint) or (start, middle, end).
    """
    z = 1j * omega_p * h
    p0, p1, p2, p3 = phi_functions(z)
    if hold == "midpoint":
        return (h * p1)[None, :]
    i0, i1, i2 = p1, p2, 2.0 * p3
    return np.stack([h * (2 * i2 - 3 * i1 + i0), h * (4 * i1 - 4 * i2), h * (2 * i2 - i1)])


def evolve(initial: PolaronState, bath: BathDiscretization, omega_q: float,
           profile: SwitchProfile, dt: float = DEFAULT_DT, full_nonlinear: bool = False,
           hold: str = "midpoint", store_modes: Optional[Sequence[int]] | str = "all",
           record_energy: bool = False, label: str = "") -> TrajectoryRecord:
    """Propagate the polaron displacements over ``[0, profile.t_f]``.

    Linear mode advances each ``f_k`` with the exact one-step propagator for a
    control held constant at its midpoint value (``hold="midpoint"``) or
    interpolated quadratically through start, middle and end of the step
    (``hold="quadratic"``). Nonlinear mode keeps the exponential dressing of
    the qubit frequency and uses classical RK4.

    ``store_modes`` selects which displacement trajectories are kept: ``"all"``,
    ``None`` (final state only) or a list of mode indices.
    """
    initial.check_bath(bath)
    if hold not in HOLDS:
        raise ValueError(f"hold must be one of {HOLDS}")
    n, h = step_grid(profile.t_f, dt)
    times = np.arange(n + 1) * h
    times[-1] = profile.t_f
    g, w = bath.couplings, bath.omegas
    omega_p = w + omega_q

    if isinstance(store_modes, str):
        if store_modes != "all":
            raise ValueError("store_modes must be 'all', None or a list of indices")
        idx = None
    elif store_modes is None:
        idx = np.array([], dtype=int)
    else:
        idx = np.asarray(store_modes, dtype=int)
    n_store = bath.n_modes if idx is None else idx.size
    snaps = np.empty((n + 1, n_store), dtype=complex) if n_store else None

    sums = np.empty(n + 1)
    energy = np.empty(n + 1) if record_energy else None
    u_rec = np.asarray(profile(times), dtype=float)
    f = initial.displacements.astype(complex)

    def record(i, f):
        s = float(np.sum(f.real ** 2 + f.imag ** 2))
        if not math.isfinite(s):
            raise IntegrationError(f"non-finite displacement at t={times[i]:.6g} ns")
        sums[i] = s
        if snaps is not None:
            snaps[i] = f if idx is None else f[idx]
        if energy is not None:
            energy[i] = (-0.5 * omega_q * math.exp(-2.0 * s) + np.sum(w * np.abs(f) ** 2)
                         + u_rec[i] * np.sum(g * f.real))

    record(0, f)
    if not full_nonlinear:
        rot = np.exp(1j * omega_p * h)
        drive = 0.5j * g * _forcing_weights(omega_p, h, hold)
        if hold == "midpoint":
            u_samples = np.asarray(profile(times[:-1] + 0.5 * h)).reshape(n, 1)
        else:
            mids = np.asarray(profile(times[:-1] + 0.5 * h))
            u_samples = np.stack([u_rec[:-1], mids, u_rec[1:]], axis=1)
        for i in range(n):
            f = rot * f + u_samples[i] @ drive
            record(i + 1, f)
    else:
        half = np.asarray(profile(times[:-1] + 0.5 * h))

        def rhs(f, u):
            s = np.sum(f.real ** 2 + f.imag ** 2)
            return 1j * f * (omega_q * np.exp(-2.0 * s) + w) + 0.5j * g * u

        for i in range(n):
            k1 = rhs(f, u_rec[i])
            k2 = rhs(f + 0.5 * h * k1, half[i])
            k3 = rhs(f + 0.5 * h * k2, half[i])
            k4 = rhs(f + h * k3, u_rec[i + 1])
            f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            record(i + 1, f)

    return TrajectoryRecord(times=times, u_values=u_rec, p_plus=population_from_sum(sums),
                            displacements=snaps, mode_indices=idx, energy=energy,
                            final_displacements=f, label=label or profile.describe())


def replay_controls(controls: Sequence[float], bath: BathDiscretization, omega_q: float,
                    dt: float, initial: Optional[PolaronState] = None) -> TrajectoryRecord:
    """Open-loop replay of a piecewise-constant control sequence."""
    profile = SwitchProfile.from_controls(controls, dt)
    if initial is None:
        initial = ground_state(bath, omega_q)
    return evolve(initial, bath, omega_q, profile, dt, store_modes=None, label="replay")


# -- closed-form endpoint ------------------------------------------------------

def final_displacement_integral(mode: Tuple[float, float], omega_q: float,
                                profile: SwitchProfile) -> complex:
    """``f_k(t_f) = -f_k0 * int_0^t_f exp(-i w' (t - t_f)) du/dt dt``.

    Valid for decoupling profiles (``u(t_f) = 0``) started from the relaxed
    displacement ``f_k0 * u(0)``. The leading minus sign makes a sudden
    switch-off leave ``f_k0 exp(i w' t_f)``, as free rotation requires.
    """
    omega_k, g_k = mode
    if abs(profile.final_value) > 1e-12:
        raise ProfileError("closed-form endpoint requires u(t_f) = 0")
    wp = omega_k + omega_q
    f0 = -g_k / (2.0 * wp)
    tf = profile.t_f
    phase_f = np.exp(1j * wp * tf)
    if profile.kind == "linear":
        # int e^{-i w' t} dt = (1 - e^{-i w' t_f}) / (i w')
        integral = -(1.0 - np.exp(-1j * wp * tf)) / (1j * wp * tf)
    elif profile.kind == "tabulated":
        t, u = profile.samples
        slopes = np.diff(u) / np.diff(t)
        seg = (np.exp(-1j * wp * t[:-1]) - np.exp(-1j * wp * t[1:])) / (1j * wp)
        integral = np.sum(slopes * seg)
    elif profile.kind == "rational-lambda":
        opts = dict(epsabs=1e-15, epsrel=1e-13, limit=400)
        with warnings.catch_warnings():
            # QAWO reports roundoff once it reaches machine precision; the value is converged
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            re, _ = integrate.quad(profile.derivative, 0.0, tf, weight="cos", wvar=wp, **opts)
            im, _ = integrate.quad(profile.derivative, 0.0, tf, weight="sin", wvar=wp, **opts)
        integral = re - 1j * im
    else:
        raise ProfileError(f"{profile.kind!r} profiles do not decouple")
    return complex(-f0 * phase_f * integral)


def asymptotic_final_displacement(mode: Tuple[float, float], omega_q: float,
                                  profile: SwitchProfile, j_max: int,
                                  printed_sign: bool = False) -> complex:
    """Partial sum of the large-``w' t_f`` expansion of ``f_k(t_f)``.

    For a symmetric switch, ``u^(j)(t_f) = (-1)^(j+1) u^(j)(0)`` and repeated
    integration by parts gives terms
    ``f_k0 ((-1)^(j+1) - e^{i w' t_f}) u^(j)(0) / (i w')^j``, which reproduce
    the exact linear-ramp endpoint. ``printed_sign=True`` uses
    ``f_k0 (1 - (-1)^j e^{i w' t_f})`` instead, kept only for comparison.
    Orders ``j < lambda`` vanish because ``u^(j)(0) = 0`` there.
    """
    if profile.kind not in ("linear", "rational-lambda"):
        raise UnsupportedProfileError(f"asymptotic expansion needs a smooth switch, got {profile.kind!r}")
    omega_k, g_k = mode
    wp = omega_k + omega_q
    f0 = -g_k / (2.0 * wp)
    e = np.exp(1j * wp * profile.t_f)
    derivs = profile.taylor_derivatives(j_max)
    total = 0j
    for j, d in enumerate(derivs, start=1):
        if d == 0.0:
            continue
        sgn = (-1) ** j
        pref = (1.0 - sgn * e) if printed_sign else (-sgn - e)
        total += pref * d / (1j * wp) ** j
    return complex(f0 * total)


# -- experiment driver -----------------------------------------------------------

@dataclass(eq=False)
class DecouplingResult:
    records: Dict[str, TrajectoryRecord]
    profiles: Dict[str, SwitchProfile]
    initial_p_plus: float
    probe_indices: np.ndarray
    omegas: np.ndarray
    final_displacements: Dict[str, np.ndarray] = field(default_factory=dict)

    def summary(self) -> List[dict]:
        rows = []
        for key, rec in self.records.items():
            prof = self.profiles[key]
            p = rec.final_p_plus
            rows.append({"profile": key, "kind": prof.kind,
                         "lambda": prof.lam if prof.kind == "rational-lambda" else None,
                         "t_f": prof.t_f, "final_p_plus": p,
                         "log10_final_p_plus": float(np.log10(p)) if p > 0 else float("-inf"),
                         "reduction_factor": self.initial_p_plus / p if p > 0 else float("inf")})
        return rows


def lambda_profiles(lambdas: Iterable[float], t_f: float = DEFAULT_T_F) -> List[SwitchProfile]:
    return [SwitchProfile.rational(float(lam), t_f) for lam in lambdas]


def nearest_modes(bath: BathDiscretization, omegas: Iterable[float]) -> np.ndarray:
    return np.array([int(np.argmin(np.abs(bath.omegas - w))) for w in omegas], dtype=int)


def decoupling_experiment(bath: BathDiscretization, omega_q: float,
                          profiles: Sequence[SwitchProfile], dt: float = DEFAULT_DT,
                          probe_omegas: Optional[Iterable[float]] = None,
                          full_nonlinear: bool = False) -> DecouplingResult:
    """Switch off the coupling from the relaxed polaron for every profile.

    Probe modes (default: the mode nearest ``w_c / 2``) keep full trajectories;
    all modes report their final displacement. The nonlinear equations start
    from the self-consistent ground state, their own stationary point.
    """
    for p in profiles:
        if abs(p(0.0) - 1.0) > 1e-12:
            raise ProfileError(f"profile {p.describe()} does not start fully coupled")
    if probe_omegas is None:
        wc = bath.params.omega_c if bath.params is not None else omega_q
        probe_omegas = [0.5 * wc]
    probes = nearest_modes(bath, probe_omegas)
    initial = ground_state(bath, omega_q, self_consistent=full_nonlinear)
    records, profs, finals = {}, {}, {}
    for p in profiles:
        key = p.describe()
        rec = evolve(initial, bath, omega_q, p, dt, full_nonlinear=full_nonlinear,
                     store_modes=probes, label=key)
        records[key] = rec
        profs[key] = p
        finals[key] = rec.final_displacements
    p0 = float(population_from_sum(initial.sum_abs2))
    return DecouplingResult(records, profs, p0, probes, bath.omegas.copy(), finals)
