"""Polaron variational ground state and derived observables."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .bath import BathDiscretization


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class PolaronState:
    """Coherent-state displacements ``f_k`` of the two-branch polaron ansatz."""

    displacements: np.ndarray
    bath_ref: str = ""

    def __post_init__(self):
        f = np.array(self.displacements, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(f)):
            raise ValueError("displacements must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "displacements", f)

    @classmethod
    def zeros(cls, bath: BathDiscretization) -> "PolaronState":
        return cls(np.zeros(bath.n_modes, dtype=complex), bath.label)

    @property
    def sum_abs2(self) -> float:
        return float(np.sum(np.abs(self.displacements) ** 2))

    def check_bath(self, bath: BathDiscretization):
        if self.displacements.size != bath.n_modes:
            raise ValueError(f"state has {self.displacements.size} modes, bath has {bath.n_modes}")


def weak_coupling_displacements(bath: BathDiscretization, omega_q: float) -> np.ndarray:
    return -bath.couplings / (2.0 * (omega_q + bath.omegas))


def ground_state(bath: BathDiscretization, omega_q: float, self_consistent: bool = False,
                 tol: float = 1e-12, max_iter: int = 200) -> PolaronState:
    """Relaxed polaron displacements.

    The weak-coupling branch is ``f_k = -g_k / (2 (w_q + w_k))``. The
    self-consistent branch iterates ``f_k = -g_k / (2 (w_q exp(-2 S) + w_k))``
    with ``S = sum |f_k|^2`` from the weak-coupling seed until the largest
    change of any displacement is below ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    g, w = bath.couplings, bath.omegas
    f = weak_coupling_displacements(bath, omega_q)
    if not self_consistent:
        return PolaronState(f, bath.label)
    residual = np.inf
    for _ in range(max_iter):
        dressed = omega_q * np.exp(-2.0 * np.sum(f * f))
        new = -g / (2.0 * (dressed + w))
        residual = float(np.max(np.abs(new - f), initial=0.0))
        f = new
        if residual < tol:
            return PolaronState(f, bath.label)
    raise ConvergenceError(f"polaron fixed point not converged after {max_iter} iterations "
                           f"(residual {residual:.3e})", residual)


def fixed_point_residual(state: PolaronState, bath: BathDiscretization, omega_q: float) -> np.ndarray:
    f = state.displacements
    dressed = omega_q * np.exp(-2.0 * state.sum_abs2)
    return np.abs(f + bath.couplings / (2.0 * (dressed + bath.omegas)))


def population_from_sum(sum_abs2):
    """Qubit excited-state population of a polaron with ``sum |f_k|^2 = sum_abs2``."""
    return -0.5 * np.expm1(-2.0 * np.asarray(sum_abs2, dtype=float))


def excited_population(state: PolaronState) -> float:
    return float(population_from_sum(state.sum_abs2))


def variational_energy(state: PolaronState, h_x: float, bath: BathDiscretization,
                       coupling: float = 1.0) -> float:
    """Energy of the polaron ansatz for a qubit field ``h_x`` along sigma_x.

    ``coupling`` multiplies the qubit-bath interaction (the switch value u).
    """
    state.check_bath(bath)
    f = state.displacements
    s = state.sum_abs2
    return float(-0.5 * h_x * np.exp(-2.0 * s)
                 + np.sum(bath.omegas * np.abs(f) ** 2)
                 + 0.5 * coupling * np.sum(bath.couplings * 2.0 * f.real))


def energy_gradient(state: PolaronState, h_x: float, bath: BathDiscretization,
                    coupling: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the energy w.r.t. ``x_k = Re f_k`` and ``y_k = Im f_k``."""
    state.check_bath(bath)
    x, y = state.displacements.real, state.displacements.imag
    damp = h_x * np.exp(-2.0 * state.sum_abs2)
    dx = 2.0 * x * damp + 2.0 * bath.omegas * x + coupling * bath.couplings
    dy = 2.0 * y * damp + 2.0 * bath.omegas * y
    return dx, dy


def correlation_profile(state: PolaronState, bath: BathDiscretization) -> Tuple[np.ndarray, np.ndarray]:
    """Per-mode qubit-bath correlation ``g_k f_k`` against ``w_k``."""
    state.check_bath(bath)
    return bath.omegas.copy(), bath.couplings * state.displacements


def log10_population(p):
    with np.errstate(divide="ignore"):
        return np.log10(p)
