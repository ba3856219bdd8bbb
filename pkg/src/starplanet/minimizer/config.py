"""Solver configuration and its flat key-value (TOML) file form."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..eos import PolytropicEos

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass
class SolverConfig:
    """Parameters of one constrained minimization.

    ``J = 0`` selects the non-rotating single-body problem with mass 1; for
    ``J > 0`` the planet mass ``m`` must lie in (0, 1/2). ``cap = None`` means
    uncapped.
    """

    J: float
    m: float = 0.0
    gamma: float = 2.0
    K: float = 1.0
    cap: float | None = None
    mixing: float = 0.5
    tol_mass: float = 1e-10
    tol_fixedpoint: float = 1e-7
    tol_multiplier: float = 1e-12
    max_iter: int = 2000
    cells_per_radius: int = 16
    margin: float = 1.5
    coupling: str = "monopole"
    seed: str = "lane_emden"
    relax_separation: bool = True

    def __post_init__(self):
        self.validate()

    @property
    def eos(self) -> PolytropicEos:
        return PolytropicEos(self.K, self.gamma)

    @property
    def single_body(self) -> bool:
        return self.J == 0

    def validate(self) -> None:
        if not (math.isfinite(self.J) and self.J >= 0):
            raise ConfigError("J must be non-negative")
        if self.J > 0 and not 0 < self.m < 0.5:
            raise ConfigError(f"planet mass m must lie in (0, 1/2), got {self.m}")
        if self.J == 0 and self.m != 0:
            raise ConfigError("J = 0 is the single-body problem; leave m at 0")
        if not 0 < self.mixing <= 1:
            raise ConfigError("mixing must lie in (0, 1]")
        for name in ("tol_mass", "tol_fixedpoint", "tol_multiplier", "K"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.cap is not None and not self.cap > 0:
            raise ConfigError("cap must be positive or uncapped")
        if self.cap is not None and self.J > 0:
            mu = self.m * (1.0 - self.m)
            eta = self.J**2 / mu**2
            threshold = 384.0 / (math.pi * eta**3)
            if not self.cap > threshold:
                raise ConfigError(f"cap must exceed the nonemptiness threshold {threshold:.6g}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")
        if int(self.cells_per_radius) != self.cells_per_radius or self.cells_per_radius < 8:
            raise ConfigError("cells_per_radius must be an integer >= 8")
        if not self.margin > 1:
            raise ConfigError("margin must exceed 1")
        if self.coupling not in ("monopole", "quadrupole"):
            raise ConfigError("coupling must be monopole or quadrupole")
        if self.seed not in ("lane_emden", "uniform"):
            raise ConfigError("seed must be lane_emden or uniform")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cap"] = "uncapped" if self.cap is None else self.cap
        return d


_TYPES = {f.name: f.type for f in fields(SolverConfig)}


def config_from_mapping(data: dict) -> SolverConfig:
    unknown = set(data) - set(_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "J" not in data:
        raise ConfigError("config needs J")
    kw = dict(data)
    if kw.get("cap") in ("uncapped", "none", None):
        kw["cap"] = None
    for key in ("max_iter", "cells_per_radius"):
        if key in kw:
            if isinstance(kw[key], bool) or float(kw[key]) != int(kw[key]):
                raise ConfigError(f"{key} must be an integer")
            kw[key] = int(kw[key])
    for key in ("J", "m", "gamma", "K", "mixing", "tol_mass", "tol_fixedpoint", "tol_multiplier",
                "margin", "cap"):
        if kw.get(key) is not None:
            if isinstance(kw[key], (bool, str)):
                raise ConfigError(f"{key} must be a number")
            kw[key] = float(kw[key])
    try:
        return SolverConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def read_config_file(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def load_config(path: str | Path) -> SolverConfig:
    return config_from_mapping(read_config_file(path))


def dump_config(config: SolverConfig) -> str:
    lines = []
    for key, value in config.to_dict().items():
        if isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        elif isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        elif isinstance(value, float):
            lines.append(f"{key} = {value!r}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
