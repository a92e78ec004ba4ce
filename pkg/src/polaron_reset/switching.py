"""Coupling switch profiles u(t) on ``[0, t_f]``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

KINDS = ("constant", "linear", "rational-lambda", "tabulated")


class UnsupportedProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SwitchProfile:
    """Control factor multiplying the qubit-bath coupling.

    ``rational-lambda`` is ``u(t) = 1 - t^lam / (t^lam + (t_f - t)^lam)``;
    ``lam = 1`` coincides with the linear ramp. ``constant`` holds ``value``.
    ``tabulated`` interpolates ``samples`` linearly.
    """

    kind: str
    t_f: float
    lam: float = 1.0
    value: float = 1.0
    samples: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")
        if self.kind == "rational-lambda" and not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.kind == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated profile needs samples")
            t, u = (np.array(a, dtype=float) for a in self.samples)
            if t.shape != u.shape or t.size < 2:
                raise ValueError("samples need matching t and u arrays of length >= 2")
            if np.any(np.diff(t) <= 0):
                raise ValueError("sample times must be strictly increasing")
            if not (np.isclose(t[0], 0.0, atol=1e-12) and np.isclose(t[-1], self.t_f, rtol=1e-12)):
                raise ValueError("samples must span [0, t_f]")
            t.setflags(write=False)
            u.setflags(write=False)
            object.__setattr__(self, "samples", (t, u))

    # -- constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, t_f: float, value: float = 1.0) -> "SwitchProfile":
        return cls("constant", t_f, value=value)

    @classmethod
    def linear(cls, t_f: float) -> "SwitchProfile":
        return cls("linear", t_f)

    @classmethod
    def rational(cls, lam: float, t_f: float) -> "SwitchProfile":
        return cls("rational-lambda", t_f, lam=lam)

    @classmethod
    def tabulated(cls, t, u, t_f: Optional[float] = None) -> "SwitchProfile":
        t = np.asarray(t, dtype=float)
        return cls("tabulated", float(t[-1]) if t_f is None else t_f, samples=(t, np.asarray(u, dtype=float)))

    @classmethod
    def from_controls(cls, controls: Sequence[float], dt: float) -> "SwitchProfile":
        """Tabulate a piecewise-constant control sequence.

        Samples sit at step midpoints (plus both endpoints), so a midpoint-hold
        replay with the same ``dt`` reproduces every ``u_t`` exactly.
        """
        u = np.asarray(controls, dtype=float)
        n = u.size
        t_mid = (np.arange(n) + 0.5) * dt
        t = np.concatenate(([0.0], t_mid, [n * dt]))
        return cls("tabulated", n * dt, samples=(t, np.concatenate(([u[0]], u, [u[-1]]))))

    # -- evaluation -------------------------------------------------------------
    def _check(self, t):
        t = np.asarray(t, dtype=float)
        eps = 1e-12 * self.t_f
        if np.any(t < -eps) or np.any(t > self.t_f + eps):
            raise ValueError(f"t outside [0, {self.t_f}]")
        return np.clip(t, 0.0, self.t_f)

    def __call__(self, t):
        t = self._check(t)
        if self.kind == "constant":
            out = np.full_like(t, self.value)
        elif self.kind == "linear":
            out = 1.0 - t / self.t_f
        elif self.kind == "rational-lambda":
            a = t ** self.lam
            out = 1.0 - a / (a + (self.t_f - t) ** self.lam)
        else:
            out = np.interp(t, *self.samples)
        return out if out.ndim else float(out)

    def derivative(self, t):
        """First time derivative of u (piecewise for tabulated profiles)."""
        t = self._check(t)
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "linear":
            out = np.full_like(t, -1.0 / self.t_f)
        elif self.kind == "rational-lambda":
            lam, tf = self.lam, self.t_f
            a, b = t ** lam, (tf - t) ** lam
            out = -lam * tf * t ** (lam - 1) * (tf - t) ** (lam - 1) / (a + b) ** 2
        else:
            ts, us = self.samples
            idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2)
            out = np.diff(us)[idx] / np.diff(ts)[idx]
        return out if out.ndim else float(out)

    @property
    def final_value(self) -> float:
        return float(self(self.t_f))

    def describe(self) -> str:
        if self.kind == "rational-lambda":
            return f"lambda={self.lam:g}"
        if self.kind == "constant":
            return f"constant={self.value:g}"
        return self.kind

    def taylor_derivatives(self, j_max: int) -> np.ndarray:
        """Derivatives ``u^(j)(0)`` for ``j = 1..j_max``.

        For non-integer lambda the derivatives of order above lambda diverge at
        t = 0, so only orders below lambda (all zero) are available.
        """
        if j_max < 1:
            raise ValueError("j_max must be >= 1")
        if self.kind == "linear":
            lam = 1.0
        elif self.kind == "rational-lambda":
            lam = self.lam
        else:
            raise UnsupportedProfileError(f"no Taylor expansion at t=0 for {self.kind!r} profiles")
        if float(lam).is_integer():
            return np.array(_rational_derivatives(int(lam), j_max), dtype=float) \
                * np.power(self.t_f, -np.arange(1, j_max + 1, dtype=float))
        if j_max >= lam:
            raise UnsupportedProfileError(
                f"u^(j)(0) diverges for j > lambda = {lam:g}; use j_max <= {math.floor(lam)}")
        return np.zeros(j_max)


@lru_cache(maxsize=64)
def _rational_derivatives(lam: int, j_max: int) -> Tuple[float, ...]:
    """``u^(j)(0)`` at ``t_f = 1``; the t_f dependence is the factor ``t_f^-j``."""
    import sympy as sp

    s = sp.symbols("s")
    u = 1 - s ** lam / (s ** lam + (1 - s) ** lam)
    poly = sp.series(u, s, 0, j_max + 1).removeO()
    return tuple(float(poly.coeff(s, j) * sp.factorial(j)) for j in range(1, j_max + 1))
