"""Solver configuration and its on-disk form."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .numerics import Tolerance

__all__ = ["SolverConfig", "ConfigError", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    quad_rel_tol: float = 1e-8
    quad_abs_tol: float = 1e-12
    # relative residual of the average-power equation E{P} = p_bar
    lambda_tol: float = 1e-6
    grid_points: int = 512
    tail_quantile: float = 1.0 - 1e-10
    mc_samples: int = 10**6
    mc_seed: int = 42
    unit: str = "nats"
    # per-state power search ceiling, as a multiple of p_bar
    p_max_factor: float = 1e6
    tau_grid_points: int = 128

    def __post_init__(self):
        for name in ("quad_rel_tol", "lambda_tol"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if not (0 < self.quad_abs_tol < 1):
            raise ConfigError(f"quad_abs_tol must lie in (0, 1), got {self.quad_abs_tol}")
        if int(self.grid_points) != self.grid_points or self.grid_points < 16:
            raise ConfigError(f"grid_points must be an integer >= 16, got {self.grid_points}")
        if not (0 < self.tail_quantile < 1):
            raise ConfigError(f"tail_quantile must lie in (0, 1), got {self.tail_quantile}")
        if int(self.mc_samples) != self.mc_samples or self.mc_samples < 1000:
            raise ConfigError(f"mc_samples must be an integer >= 1000, got {self.mc_samples}")
        if self.unit not in ("nats", "bits"):
            raise ConfigError(f"unit must be 'nats' or 'bits', got {self.unit!r}")
        if not self.p_max_factor > 1:
            raise ConfigError("p_max_factor must exceed 1")
        if self.tau_grid_points < 64:
            raise ConfigError("tau_grid_points must be >= 64")

    @property
    def quad_tol(self) -> Tolerance:
        return Tolerance(rel=self.quad_rel_tol, abs=self.quad_abs_tol, max_iter=4000)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SolverConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, raw in values.items():
            default = known[key].default
            try:
                if isinstance(default, str):
                    value = str(raw)
                elif isinstance(default, int):
                    as_float = float(raw)
                    if not as_float.is_integer():
                        raise ValueError("not an integer")
                    value = int(as_float)
                else:
                    value = float(raw)
            except (TypeError, ValueError, OverflowError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            kwargs[key] = value
        return cls(**kwargs)

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path) -> SolverConfig:
    """Read a flat JSON object whose keys are SolverConfig fields."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise ConfigError("config file must be a flat JSON object")
    return SolverConfig.from_mapping(data)
