"""Experiment configuration: one JSON document, unknown keys rejected."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .bath import (DEFAULT_ALPHA, DEFAULT_N_MODES, DEFAULT_OMEGA_Q, BathDiscretization,
                   SpectralDensityParams, discretize)

KINDS = ("ground-state", "decouple", "lqr", "validate")
KIND_ALIASES = {"decouple-sweep": "decouple", "lqr-optimize": "lqr", "oracle-validate": "validate"}


class ConfigError(ValueError):
    pass


@dataclass
class BathConfig:
    alpha: float = DEFAULT_ALPHA
    omega_c: float = DEFAULT_OMEGA_Q
    omega_q: float = DEFAULT_OMEGA_Q
    n_modes: int = DEFAULT_N_MODES
    omega_max: Optional[float] = None
    scheme: str = "gauss-legendre"

    def validate(self):
        if self.alpha < 0:
            raise ConfigError("bath.alpha must be non-negative")
        for name in ("omega_c", "omega_q"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"bath.{name} must be positive")
        if self.n_modes < 1:
            raise ConfigError("bath.n_modes must be >= 1")
        if self.omega_max is not None and not self.omega_max > 0:
            raise ConfigError("bath.omega_max must be positive")

    @property
    def params(self) -> SpectralDensityParams:
        return SpectralDensityParams(self.alpha, self.omega_c, self.omega_q)

    def build(self, n_modes: Optional[int] = None) -> BathDiscretization:
        return discretize(self.params, n_modes or self.n_modes, self.omega_max, self.scheme)


@dataclass
class GroundStateConfig:
    self_consistent: bool = False
    tol: float = 1e-12
    max_iter: int = 200

    def validate(self):
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("ground_state.tol must be positive and max_iter >= 1")


@dataclass
class DecoupleConfig:
    lambdas: List[float] = field(default_factory=lambda: [1.0, 1.5, 2.0, 2.5])
    t_f: float = 0.4
    dt: float = 1e-3
    full_nonlinear: bool = False
    probe_omegas: Optional[List[float]] = None  # rad/ns; default w_c / 2
    t_f_scan: List[float] = field(default_factory=list)

    def validate(self):
        if not self.lambdas or any(not lam > 0 for lam in self.lambdas):
            raise ConfigError("decouple.lambdas must be a non-empty list of positive values")
        if not self.t_f > 0 or not self.dt > 0 or self.dt >= self.t_f:
            raise ConfigError("decouple needs 0 < dt < t_f")
        if any(not t > self.dt for t in self.t_f_scan):
            raise ConfigError("decouple.t_f_scan entries must exceed dt")


@dataclass
class LqrConfig:
    R: List[float] = field(default_factory=lambda: [1e-7, 1e-9, 1e-11])
    n_modes_coarse: int = 150
    dt: float = 1e-3
    t_f: float = 0.4
    replay_n_modes: Optional[int] = None  # default: bath.n_modes

    def validate(self):
        if not self.R or any(not r > 0 for r in self.R):
            raise ConfigError("lqr.R must be a non-empty list of positive values")
        if self.n_modes_coarse < 1:
            raise ConfigError("lqr.n_modes_coarse must be >= 1")
        if not self.t_f > 0 or not self.dt > 0 or self.dt >= self.t_f:
            raise ConfigError("lqr needs 0 < dt < t_f")


@dataclass
class OracleConfig:
    n_modes: int = 3
    fock_cutoff: int = 6
    target_sum_f2: float = 1e-3
    lam: float = 2.0
    t_f: float = 0.2
    dt: float = 1e-3
    halvings: int = 2

    def validate(self):
        if not 1 <= self.n_modes <= 4 or not 2 <= self.fock_cutoff <= 8:
            raise ConfigError("oracle supports 1..4 modes and cutoff 2..8")
        if self.target_sum_f2 < 0 or not self.lam > 0 or self.halvings < 0:
            raise ConfigError("oracle.target_sum_f2 >= 0, lam > 0, halvings >= 0 required")
        if not self.t_f > 0 or not self.dt > 0 or self.dt >= self.t_f:
            raise ConfigError("oracle needs 0 < dt < t_f")


@dataclass
class ExperimentConfig:
    kind: Optional[str] = None
    bath: BathConfig = field(default_factory=BathConfig)
    ground_state: GroundStateConfig = field(default_factory=GroundStateConfig)
    decouple: DecoupleConfig = field(default_factory=DecoupleConfig)
    lqr: LqrConfig = field(default_factory=LqrConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output_dir: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        self.kind = KIND_ALIASES.get(self.kind, self.kind)
        if self.kind is not None and self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        for section in (self.bath, self.ground_state, self.decouple, self.lqr, self.oracle):
            section.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where or 'config'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory() if fields[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}".lstrip("."))
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        cfg = _build(ExperimentConfig, data, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path: Optional[str | Path]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
