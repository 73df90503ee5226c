"""Resolved run configuration: defaults, validation, key=value files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


_CHOICES = {
    "fusion_space": ("similarity", "distance"),
    "spatial_pool": ("none", "gap"),
    "variant": ("V0", "V1", "V2", "V3"),
}


@dataclass(frozen=True)
class Config:
    way: int = 5
    shot: int = 5
    query: int = 15
    episodes: int = 600
    tau: float = 0.3
    lam: float = 0.03
    jitter: float = 1e-5
    epsilon: float = 1e-6
    d_max: int = 5
    reduction: int = 4
    logit_scale: float = 1.0
    seed: int = 0
    fusion_space: str = "similarity"
    spatial_pool: str = "none"
    variant: str = "V3"
    fd_step: float = 1e-4
    lr: float = 0.05
    steps: int = 100

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, name, legal):
            if not cond:
                raise ConfigError(f"{name}={getattr(self, name)!r} out of range; legal: {legal}")

        need(self.way >= 2, "way", ">= 2")
        need(self.shot >= 1, "shot", ">= 1")
        need(self.query >= 1, "query", ">= 1")
        need(self.episodes >= 1, "episodes", ">= 1")
        need(0.0 < self.tau < 1.0, "tau", "(0, 1)")
        need(self.lam >= 0.0, "lam", ">= 0")
        need(self.jitter >= 0.0, "jitter", ">= 0")
        need(self.epsilon > 0.0, "epsilon", "> 0")
        need(self.d_max >= 1, "d_max", ">= 1")
        need(self.reduction >= 1, "reduction", ">= 1")
        need(self.logit_scale > 0.0, "logit_scale", "> 0")
        need(self.seed >= 0, "seed", ">= 0")
        need(self.fd_step > 0.0, "fd_step", "> 0")
        need(self.lr >= 0.0, "lr", ">= 0")
        need(self.steps >= 0, "steps", ">= 0")
        for name, legal in _CHOICES.items():
            need(getattr(self, name) in legal, name, "|".join(legal))

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def as_lines(self) -> list[str]:
        return [f"config.{f.name}={getattr(self, f.name)!r}" for f in fields(self)]


def _coerce(name, raw):
    kind = {f.name: f.type for f in fields(Config)}[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from exc
    return str(raw)


def parse_config_text(text: str) -> dict:
    known = {f.name for f in fields(Config)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, **overrides) -> Config:
    """Defaults <- key=value file <- explicit overrides (``None`` overrides are ignored)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "lambda":
            key = "lam"
        values[key] = _coerce(key, value)
    try:
        return Config(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
