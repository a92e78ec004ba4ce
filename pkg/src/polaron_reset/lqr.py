"""Finite-horizon linear-quadratic regulator for the decoupling control.

State vector ``x = (Re f_1, Im f_1, Re f_2, Im f_2, ...)``. Cost
``J = |x_n|^2 + R sum_t u_t^2`` (terminal weight identity, no running state
cost, no cross term). ``R`` is the per-step weight; the equivalent weight of
the time-continuous penalty ``R_c int u^2 dt`` is ``R_c = R / dt``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .bath import BathDiscretization
from .polaron import population_from_sum, weak_coupling_displacements
from .tdvp import replay_controls, step_grid


class RiccatiError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class AffineSystem:
    """``x_{t+1} = A x_t + B u_t`` with ``A`` block-diagonal 2x2 rotations."""

    cos: np.ndarray
    sin: np.ndarray
    B: np.ndarray
    dt: float
    omega_p: np.ndarray
    couplings: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.cos.size

    @property
    def dim(self) -> int:
        return 2 * self.cos.size

    def dense_A(self) -> np.ndarray:
        A = np.zeros((self.dim, self.dim))
        k = np.arange(self.n_modes)
        A[2 * k, 2 * k] = self.cos
        A[2 * k, 2 * k + 1] = -self.sin
        A[2 * k + 1, 2 * k] = self.sin
        A[2 * k + 1, 2 * k + 1] = self.cos
        return A

    def apply_A(self, x: np.ndarray) -> np.ndarray:
        """``A @ x`` in O(N); ``x`` may carry leading batch axes."""
        xr = x.reshape(x.shape[:-1] + (self.n_modes, 2))
        re = self.cos * xr[..., 0] - self.sin * xr[..., 1]
        im = self.sin * xr[..., 0] + self.cos * xr[..., 1]
        return np.stack([re, im], axis=-1).reshape(x.shape)

    def right_multiply_A(self, M: np.ndarray) -> np.ndarray:
        """``M @ A`` in O(rows * N)."""
        Mr = M.reshape(M.shape[:-1] + (self.n_modes, 2))
        c0 = Mr[..., 0] * self.cos + Mr[..., 1] * self.sin
        c1 = -Mr[..., 0] * self.sin + Mr[..., 1] * self.cos
        return np.stack([c0, c1], axis=-1).reshape(M.shape)

    def step(self, x: np.ndarray, u: float) -> np.ndarray:
        return self.apply_A(x) + self.B * u

    def relaxed_state(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[0::2] = -self.couplings / (2.0 * self.omega_p)
        return x


def build_system(bath: BathDiscretization, omega_q: float, dt: float) -> AffineSystem:
    """Exact one-step map of the linear displacement equations for constant u."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    wp = bath.omegas + omega_q
    c, s = np.cos(wp * dt), np.sin(wp * dt)
    pref = bath.couplings / (2.0 * wp)
    B = np.empty(2 * bath.n_modes)
    B[0::2] = pref * (c - 1.0)
    B[1::2] = pref * s
    return AffineSystem(c, s, B, float(dt), wp, bath.couplings.copy())


@dataclass(eq=False)
class RiccatiResult:
    gains: np.ndarray  # (n_steps, 2N), row t is F_t
    P0: np.ndarray
    R: float
    history: Optional[List[np.ndarray]] = None  # P_0 .. P_n when retained


def riccati_backward(system: AffineSystem, R: float, n_steps: int,
                     retain_P: bool = False) -> RiccatiResult:
    """Backpropagate the Riccati recursion from ``P_n = I``.

    ``F_t = (R + B^T P_{t+1} B)^-1 B^T P_{t+1} A`` and
    ``P_t = A^T P_{t+1} A - (A^T P_{t+1} B)(R + B^T P_{t+1} B)^-1 (B^T P_{t+1} A)``.
    Rotational structure of ``A`` keeps each step at O(N^2).
    """
    if not R > 0:
        raise ValueError("control weight R must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    B = system.B
    P = np.eye(system.dim)
    gains = np.empty((n_steps, system.dim))
    history = [P.copy()] if retain_P else None
    for t in range(n_steps - 1, -1, -1):
        PB = P @ B
        denom = R + B @ PB
        if not denom > 0:
            raise RiccatiError(f"R + B^T P B = {denom:.3e} at step {t}")
        PA = system.right_multiply_A(P)
        v = B @ PA
        gains[t] = v / denom
        ATPA = system.right_multiply_A(PA.T)
        P = ATPA - np.outer(v, v) / denom
        P = 0.5 * (P + P.T)
        if retain_P:
            history.append(P.copy())
    if history is not None:
        history.reverse()
    return RiccatiResult(gains, P, float(R), history)


@dataclass(eq=False)
class LqrSolution:
    gains: np.ndarray
    control: np.ndarray
    states: np.ndarray  # (n_steps + 1, 2N)
    R: float
    dt: float
    terminal_cost: float
    control_cost: float
    P0: Optional[np.ndarray] = None
    P_history: Optional[List[np.ndarray]] = None
    extra: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return self.terminal_cost + self.control_cost

    @property
    def final_p_plus(self) -> float:
        return float(population_from_sum(self.terminal_cost))

    @property
    def p_plus(self) -> np.ndarray:
        return population_from_sum(np.sum(self.states ** 2, axis=1))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * self.dt

    @property
    def R_continuous(self) -> float:
        return self.R / self.dt

    def summary(self) -> dict:
        return {"R": self.R, "R_continuous": self.R_continuous, "n_modes": self.states.shape[1] // 2,
                "dt": self.dt, "n_steps": int(self.control.size),
                "terminal_cost": self.terminal_cost, "control_cost": self.control_cost,
                "total_cost": self.total_cost, "final_P_plus": self.final_p_plus,
                "zero_crossings": int(zero_crossings(self.control)), **self.extra}


def closed_loop(system: AffineSystem, gains: np.ndarray, x0: np.ndarray, R: float) -> LqrSolution:
    """Run ``u_t = -F_t x_t`` from ``x0`` and collect the cost breakdown."""
    x0 = np.asarray(x0, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if x0.shape != (system.dim,) or gains.ndim != 2 or gains.shape[1] != system.dim:
        raise ValueError(f"dimension mismatch: system {system.dim}, x0 {x0.shape}, gains {gains.shape}")
    n = gains.shape[0]
    states = np.empty((n + 1, system.dim))
    control = np.empty(n)
    states[0] = x0
    for t in range(n):
        control[t] = -gains[t] @ states[t]
        states[t + 1] = system.step(states[t], control[t])
    return LqrSolution(gains, control, states, float(R), system.dt,
                       float(states[-1] @ states[-1]), float(R * control @ control))


def rollout(system: AffineSystem, controls: Sequence[float], x0: np.ndarray) -> np.ndarray:
    controls = np.asarray(controls, dtype=float)
    states = np.empty((controls.size + 1, system.dim))
    states[0] = x0
    for t, u in enumerate(controls):
        states[t + 1] = system.step(states[t], u)
    return states


def cost(system: AffineSystem, controls: Sequence[float], x0: np.ndarray, R: float) -> float:
    """``J = |x_n|^2 + R sum u_t^2`` for an open-loop control sequence."""
    controls = np.asarray(controls, dtype=float)
    x = np.asarray(x0, dtype=float)
    for u in controls:
        x = system.step(x, u)
    return float(x @ x + R * controls @ controls)


def zero_crossings(u: np.ndarray) -> int:
    s = np.sign(np.asarray(u))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def optimize(bath: BathDiscretization, omega_q: float, R: float, t_f: float = 0.4,
             dt: float = 1e-3, retain_P: bool = False) -> LqrSolution:
    """Optimal decoupling control from the relaxed polaron on ``bath``."""
    n, h = step_grid(t_f, dt)
    system = build_system(bath, omega_q, h)
    ric = riccati_backward(system, R, n, retain_P=retain_P)
    sol = closed_loop(system, ric.gains, system.relaxed_state(), R)
    sol.P0 = ric.P0
    sol.P_history = ric.history
    return sol


def evaluate_on_fine_bath(controls: Sequence[float], fine_bath: BathDiscretization,
                          omega_q: float, dt: float) -> float:
    """Final population after replaying ``controls`` open-loop on another bath."""
    return replay_controls(controls, fine_bath, omega_q, dt).final_p_plus


def relaxed_population(bath: BathDiscretization, omega_q: float) -> float:
    return float(population_from_sum(np.sum(weak_coupling_displacements(bath, omega_q) ** 2)))
