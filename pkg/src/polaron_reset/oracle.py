"""Exact Schroedinger dynamics of the spin-boson model on a few truncated modes.

Used as an independent check of the variational dynamics. The Hilbert space
is qubit x Fock(cutoff)^M, stored in the sigma_x eigenbasis (|+>, |->) so the
qubit field is diagonal. The conserved parity ``sigma_x (-1)^N`` splits H into
two equal blocks, each propagated with exact per-step exponentials.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bath import BathDiscretization, SpectralDensityParams, spectral_density
from .polaron import ground_state, population_from_sum
from .switching import SwitchProfile
from .tdvp import evolve, step_grid

LEAKAGE_LIMIT = 1e-6
TRUNCATION_LIMIT = 1e-8


class TruncationError(ValueError):
    """Coherent states do not fit in the Fock cutoff."""


class TruncatedSystem:
    """Spin-boson Hamiltonian ``w_q/2 sx + sum w_k n_k + u sz/2 sum g_k x_k``."""

    def __init__(self, omegas: Sequence[float], couplings: Sequence[float],
                 omega_q: float, fock_cutoff: int = 6):
        self.omegas = np.asarray(omegas, dtype=float)
        self.couplings = np.asarray(couplings, dtype=float)
        if self.omegas.shape != self.couplings.shape or self.omegas.ndim != 1:
            raise ValueError("omegas and couplings must be 1-d arrays of equal length")
        if not 1 <= self.omegas.size <= 4:
            raise ValueError("oracle supports 1 to 4 modes")
        if not 2 <= fock_cutoff <= 8:
            raise ValueError("fock_cutoff must be within 2..8")
        self.omega_q = float(omega_q)
        self.cutoff = int(fock_cutoff)
        m, c = self.omegas.size, self.cutoff
        self.n_modes = m
        self.bath_dim = c ** m
        self.dim = 2 * self.bath_dim

        occ = np.array(list(itertools.product(range(c), repeat=m)), dtype=int)
        self.occupations = occ  # row i: Fock numbers of bath basis state i
        self.bath_energy = occ @ self.omegas
        ann = np.diag(np.sqrt(np.arange(1, c)), 1)
        eye = np.eye(c)
        self.lowering = []
        for k in range(m):
            op = np.array([[1.0]])
            for j in range(m):
                op = np.kron(op, ann if j == k else eye)
            self.lowering.append(op)
        self.position = sum(g * (b + b.T) for g, b in zip(self.couplings, self.lowering))

        # qubit label 0 = |+>, 1 = |->; sector = (qubit label + N) mod 2
        total = occ.sum(axis=1)
        self.sectors = []
        for s in (0, 1):
            q = (s - total) % 2
            idx = q * self.bath_dim + np.arange(self.bath_dim)
            diag = np.where(q == 0, 0.5 * self.omega_q, -0.5 * self.omega_q) + self.bath_energy
            self.sectors.append((idx, diag))
        self._cache: Dict[float, list] = {}

    @classmethod
    def from_bath(cls, bath: BathDiscretization, omega_q: float, fock_cutoff: int = 6):
        return cls(bath.omegas, bath.couplings, omega_q, fock_cutoff)

    # -- Hamiltonian ------------------------------------------------------------
    def _sector_hamiltonian(self, s: int, u: float) -> np.ndarray:
        idx, diag = self.sectors[s]
        # coupling: (sz/2) x X with sz swapping |+> and |->; within a sector each
        # bath state appears once, so the block is X/2 on the bath indices
        return np.diag(diag) + 0.5 * u * self.position

    def hamiltonian(self, u: float = 1.0) -> np.ndarray:
        H = np.zeros((self.dim, self.dim))
        for s in (0, 1):
            idx, _ = self.sectors[s]
            H[np.ix_(idx, idx)] = self._sector_hamiltonian(s, u)
        return H

    def _eig(self, u: float):
        key = float(u)
        hit = self._cache.get(key)
        if hit is None:
            hit = [np.linalg.eigh(self._sector_hamiltonian(s, key)) for s in (0, 1)]
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def spectral_radius(self, u: float = 1.0) -> float:
        return max(float(np.max(np.abs(e))) for e, _ in self._eig(u))

    def propagate(self, psi: np.ndarray, u: float, dt: float) -> np.ndarray:
        out = np.empty_like(psi)
        for (idx, _), (e, v) in zip(self.sectors, self._eig(u)):
            out[idx] = v @ (np.exp(-1j * e * dt) * (v.T @ psi[idx]))
        return out

    # -- observables ------------------------------------------------------------
    def split(self, psi: np.ndarray):
        return psi[:self.bath_dim], psi[self.bath_dim:]

    def p_plus(self, psi: np.ndarray) -> float:
        plus, _ = self.split(psi)
        return float(np.vdot(plus, plus).real)

    def sigma_x(self, psi: np.ndarray) -> float:
        plus, minus = self.split(psi)
        return float(np.vdot(plus, plus).real - np.vdot(minus, minus).real)

    def energy(self, psi: np.ndarray, u: float = 1.0) -> float:
        return float(np.vdot(psi, self.hamiltonian(u) @ psi).real)

    def top_level_population(self, psi: np.ndarray) -> float:
        """Largest population of any mode's highest Fock level."""
        plus, minus = self.split(psi)
        prob = np.abs(plus) ** 2 + np.abs(minus) ** 2
        top = self.occupations == self.cutoff - 1
        return float(max(prob[top[:, k]].sum() for k in range(self.n_modes)))


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    with np.errstate(divide="ignore"):
        mag = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_fact) * np.abs(alpha) ** n
    return mag * np.exp(1j * np.angle(alpha) * n) if alpha != 0 else (n == 0).astype(complex)


@dataclass
class PreparedState:
    psi: np.ndarray
    truncation_error: float


def prepare_polaron(system: TruncatedSystem, displacements: Sequence[complex]) -> PreparedState:
    """Truncated ``(|up, f> - |down, -f>) / sqrt(2)``, renormalized."""
    f = np.asarray(displacements, dtype=complex)
    if f.size != system.n_modes:
        raise ValueError("one displacement per mode is required")
    plus_f = np.array([1.0 + 0j])
    minus_f = np.array([1.0 + 0j])
    for fk in f:
        plus_f = np.kron(plus_f, coherent_amplitudes(fk, system.cutoff))
        minus_f = np.kron(minus_f, coherent_amplitudes(-fk, system.cutoff))
    err = max(1.0 - float(np.vdot(plus_f, plus_f).real), 0.0)
    if err > TRUNCATION_LIMIT:
        raise TruncationError(f"coherent-state truncation error {err:.2e} exceeds {TRUNCATION_LIMIT:g}")
    # |up> = (|+> + |->)/sqrt2, |down> = (|+> - |->)/sqrt2
    psi = 0.5 * np.concatenate([plus_f - minus_f, plus_f + minus_f])
    psi /= np.linalg.norm(psi)
    return PreparedState(psi, err)


def displacement_expectations(system: TruncatedSystem, psi: np.ndarray) -> np.ndarray:
    """``<sigma_z b_k>`` for every mode."""
    plus, minus = system.split(psi)
    return np.array([np.vdot(plus, b @ minus) + np.vdot(minus, b @ plus) for b in system.lowering])


@dataclass(eq=False)
class OracleResult:
    times: np.ndarray
    p_plus: np.ndarray
    displacements: np.ndarray  # <sigma_z b_k>(t)
    norm_drift: float
    energy: np.ndarray
    leakage: float
    valid: bool
    final_state: np.ndarray = field(repr=False, default=None)

    @property
    def final_p_plus(self) -> float:
        return float(self.p_plus[-1])


def exact_evolve(system: TruncatedSystem, psi0: np.ndarray, profile: SwitchProfile,
                 dt: float) -> OracleResult:
    """Schroedinger evolution with u held at its step-midpoint value.

    Runs whose top Fock level ever holds more than ``LEAKAGE_LIMIT`` are
    returned with ``valid=False``.
    """
    n, h = step_grid(profile.t_f, dt)
    times = np.arange(n + 1) * h
    u_mid = np.asarray(profile(times[:-1] + 0.5 * h))
    radius = max(system.spectral_radius(float(u)) for u in (u_mid.min(), u_mid.max()))
    if radius * h >= 0.5:
        raise ValueError(f"dt={h:g} does not resolve the spectrum (|H| dt = {radius * h:.2f})")
    psi = np.asarray(psi0, dtype=complex)
    norm0 = np.linalg.norm(psi)
    u_rec = np.asarray(profile(times))
    p = np.empty(n + 1)
    disp = np.empty((n + 1, system.n_modes), dtype=complex)
    energy = np.empty(n + 1)
    drift = 0.0
    leak = 0.0
    for i in range(n + 1):
        if i:
            psi = system.propagate(psi, float(u_mid[i - 1]), h)
        p[i] = system.p_plus(psi)
        disp[i] = displacement_expectations(system, psi)
        energy[i] = system.energy(psi, float(u_rec[i]))
        drift = max(drift, abs(np.linalg.norm(psi) - norm0))
        leak = max(leak, system.top_level_population(psi))
    return OracleResult(times, p, disp, drift, energy, leak, leak < LEAKAGE_LIMIT, psi)


def oracle_bath(n_modes: int = 3, target_sum_f2: float = 1e-3,
                params: SpectralDensityParams | None = None) -> BathDiscretization:
    """Geometrically spaced modes in ``[w_c/4, 2 w_c]`` with Ohmic-shaped couplings
    rescaled so the relaxed ``sum f_k^2`` equals ``target_sum_f2``."""
    params = params or SpectralDensityParams()
    w = params.omega_c * np.geomspace(0.25, 2.0, n_modes)
    shape = np.sqrt(spectral_density(w, params) * w)
    f2 = np.sum(shape ** 2 / (4 * (w + params.omega_q) ** 2))
    g = shape * math.sqrt(target_sum_f2 / f2) if target_sum_f2 > 0 else np.zeros_like(w)
    return BathDiscretization.from_modes(w, g, label=f"oracle:{n_modes}")


@dataclass
class Comparison:
    scale: float
    exact_p_plus: float
    tdvp_p_plus: float
    relative_discrepancy: float
    valid: bool
    displacement_error: float  # max_t,k |<sz b_k> - conj f_k| / max |f_k|
    magnitude_error: float  # max_t,k ||<sz b_k>| - |f_k|| / |f_k|

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def compare_with_tdvp(bath: BathDiscretization, omega_q: float, profile: SwitchProfile,
                      dt: float, fock_cutoff: int = 6, scale: float = 1.0) -> Comparison:
    """Run oracle and linear TDVP from the same relaxed polaron and compare.

    The variational displacements rotate as ``exp(+i w' t)`` while Schroedinger
    evolution rotates ``<sigma_z b_k>`` as ``exp(-i w' t)``, so the oracle is
    compared with ``conj(f_k)``; magnitudes and populations are unaffected.
    """
    initial = ground_state(bath, omega_q)
    system = TruncatedSystem.from_bath(bath, omega_q, fock_cutoff)
    prep = prepare_polaron(system, initial.displacements)
    exact = exact_evolve(system, prep.psi, profile, dt)
    approx = evolve(initial, bath, omega_q, profile, dt)
    pe, pt = exact.final_p_plus, approx.final_p_plus
    if pe == pt:
        rel = 0.0
    else:
        rel = abs(pe - pt) / abs(pe) if pe else math.inf
    f = approx.displacements.conj()
    ref = np.abs(f)
    if ref.max() > 0:
        derr = float(np.max(np.abs(exact.displacements - f)) / ref.max())
        merr = float(np.max(np.abs(np.abs(exact.displacements) - ref) / ref))
    else:
        derr = merr = float(np.max(np.abs(exact.displacements), initial=0.0))
    return Comparison(scale, pe, pt, rel, exact.valid, derr, merr)


def coupling_halving_series(bath: BathDiscretization, omega_q: float, profile: SwitchProfile,
                            dt: float, fock_cutoff: int = 6, halvings: int = 2) -> List[Comparison]:
    out = []
    for h in range(halvings + 1):
        c = 0.5 ** h
        out.append(compare_with_tdvp(bath.scaled(c), omega_q, profile, dt, fock_cutoff, c))
    return out


def relaxed_population(bath: BathDiscretization, omega_q: float) -> float:
    return float(population_from_sum(ground_state(bath, omega_q).sum_abs2))
