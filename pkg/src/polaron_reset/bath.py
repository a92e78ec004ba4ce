"""Ohmic environment and its reduction to a finite set of bath modes.

Angular frequencies are in rad/ns and times in ns everywhere in the package.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict

import numpy as np
from scipy.special import roots_legendre

TWO_PI = 2.0 * np.pi
DEFAULT_OMEGA_Q = TWO_PI * 5.0
DEFAULT_ALPHA = 0.03
DEFAULT_N_MODES = 2000

SCHEMES = ("midpoint-linear", "gauss-legendre", "explicit")


class BathConfigError(ValueError):
    """Invalid bath parameters or discretization request."""


@dataclass(frozen=True)
class SpectralDensityParams:
    alpha: float = DEFAULT_ALPHA
    omega_c: float = DEFAULT_OMEGA_Q
    omega_q: float = DEFAULT_OMEGA_Q

    def __post_init__(self):
        # alpha = 0 is allowed so that uncoupled reference runs share the code path
        if not self.alpha >= 0:
            raise BathConfigError(f"alpha must be non-negative, got {self.alpha}")
        if not self.omega_c > 0 or not self.omega_q > 0:
            raise BathConfigError("omega_c and omega_q must be positive")


def spectral_density(omega, params: SpectralDensityParams):
    """Ohmic spectral density with exponential cutoff, ``2 alpha w exp(-w/w_c)``."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    out = 2.0 * params.alpha * w * np.exp(-w / params.omega_c)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class BathDiscretization:
    """Finite mode set whose weighted sums reproduce integrals over J(w).

    ``couplings**2`` already include the quadrature weights, so
    ``sum(g**2 * phi(w))`` approximates ``int J(w) phi(w) dw``.
    """

    omegas: np.ndarray
    couplings: np.ndarray
    scheme: str = "explicit"
    omega_max: float = float("nan")
    params: SpectralDensityParams | None = None
    label: str = field(default="")

    def __post_init__(self):
        w = np.array(self.omegas, dtype=float).reshape(-1)
        g = np.array(self.couplings, dtype=float).reshape(-1)
        if w.shape != g.shape:
            raise BathConfigError("omegas and couplings must have equal length")
        if w.size and (w[0] <= 0 or np.any(np.diff(w) <= 0)):
            raise BathConfigError("mode frequencies must be positive and strictly increasing")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise BathConfigError("couplings must be finite and non-negative")
        if self.scheme not in SCHEMES:
            raise BathConfigError(f"unknown scheme {self.scheme!r}")
        w.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "couplings", g)
        if not self.label:
            object.__setattr__(self, "label", f"{self.scheme}:{w.size}")

    @classmethod
    def from_modes(cls, omegas, couplings, label: str = "") -> "BathDiscretization":
        return cls(omegas=omegas, couplings=couplings, scheme="explicit", label=label)

    @property
    def n_modes(self) -> int:
        return self.omegas.size

    def __len__(self) -> int:
        return self.omegas.size

    def scaled(self, factor: float) -> "BathDiscretization":
        """Same modes with every coupling multiplied by ``factor``."""
        return BathDiscretization(self.omegas, self.couplings * factor, self.scheme,
                                  self.omega_max, None, f"{self.label}*{factor:g}")

    def integrate(self, phi: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.couplings ** 2 * phi(self.omegas)))


@lru_cache(maxsize=16)
def _legendre(n: int):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def discretize(params: SpectralDensityParams, n_modes: int = DEFAULT_N_MODES,
               omega_max: float | None = None,
               scheme: str = "gauss-legendre") -> BathDiscretization:
    """Sample J(w) on ``[0, omega_max]`` with ``n_modes`` quadrature nodes.

    ``omega_max`` defaults to ten cutoff frequencies.
    """
    if omega_max is None:
        omega_max = 10.0 * params.omega_c
    if int(n_modes) != n_modes or n_modes < 1:
        raise BathConfigError(f"n_modes must be a positive integer, got {n_modes}")
    if not omega_max > 0:
        raise BathConfigError(f"omega_max must be positive, got {omega_max}")
    n_modes = int(n_modes)
    if scheme == "midpoint-linear":
        h = omega_max / n_modes
        nodes = (np.arange(n_modes) + 0.5) * h
        weights = np.full(n_modes, h)
    elif scheme == "gauss-legendre":
        x, w = _legendre(n_modes)
        nodes = 0.5 * omega_max * (x + 1.0)
        weights = 0.5 * omega_max * w
    else:
        raise BathConfigError(f"unknown discretization scheme {scheme!r}")
    g = np.sqrt(spectral_density(nodes, params) * weights)
    return BathDiscretization(nodes, g, scheme, float(omega_max), params)


def sum_f2(bath: BathDiscretization, omega_q: float) -> float:
    """Total weak-coupling polaron displacement ``sum_k g_k^2 / (4 (w_k + w_q)^2)``."""
    if bath.n_modes == 0:
        return 0.0
    return float(np.sum(bath.couplings ** 2 / (4.0 * (bath.omegas + omega_q) ** 2)))


# -- serialization -----------------------------------------------------------

BATH_KEYS = ("alpha", "omega_c", "omega_q", "n_modes", "omega_max", "scheme")


def bath_spec(params: SpectralDensityParams, n_modes: int = DEFAULT_N_MODES,
              omega_max: float | None = None, scheme: str = "gauss-legendre") -> Dict[str, Any]:
    if omega_max is None:
        omega_max = 10.0 * params.omega_c
    return {"alpha": params.alpha, "omega_c": params.omega_c, "omega_q": params.omega_q,
            "n_modes": int(n_modes), "omega_max": float(omega_max), "scheme": scheme}


def bath_from_spec(spec: Dict[str, Any] | str) -> BathDiscretization:
    """Build a discretization from a JSON object (or string) with the keys of BATH_KEYS."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    unknown = set(spec) - set(BATH_KEYS)
    if unknown:
        raise BathConfigError(f"unknown bath keys: {sorted(unknown)}")
    params = SpectralDensityParams(
        alpha=float(spec.get("alpha", DEFAULT_ALPHA)),
        omega_c=float(spec.get("omega_c", DEFAULT_OMEGA_Q)),
        omega_q=float(spec.get("omega_q", DEFAULT_OMEGA_Q)),
    )
    omega_max = spec.get("omega_max")
    return discretize(params, int(spec.get("n_modes", DEFAULT_N_MODES)),
                      None if omega_max is None else float(omega_max),
                      spec.get("scheme", "gauss-legendre"))


def bath_to_spec(bath: BathDiscretization) -> Dict[str, Any]:
    if bath.params is None:
        raise BathConfigError("explicit mode lists have no parametric JSON form")
    return bath_spec(bath.params, bath.n_modes, bath.omega_max, bath.scheme)
