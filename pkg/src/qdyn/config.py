"""Plain-text scenario configuration.

A config file holds one ``key = value`` pair per line; ``#`` starts a comment.
Keys left unset fall back to per-method defaults chosen by ``preset``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError

__all__ = [
    "POTENTIALS",
    "METHODS",
    "PRESETS",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "apply_overrides",
    "serialize_config",
    "method_defaults",
]

POTENTIALS = ("barrier", "well", "quartic", "doublewell", "harmonic", "free")
METHODS = ("chebyshev", "cranknicolson", "diag", "linprop", "wigner1", "wigner2", "tomogram-char", "tomogram-sde")
PRESETS = ("desk", "full")
REQUIRED = ("potential", "method")

# Full-scale parameters; the desk preset shrinks ensembles and grids.
_FULL = {
    "chebyshev": dict(grid_n=1024, dq=0.08, dt=0.4, t_final=56.0),
    "cranknicolson": dict(grid_n=1024, dq=0.08, dt=0.01, t_final=56.0),
    "diag": dict(grid_n=128, dq=0.32, dt=0.4, t_final=56.0),
    "linprop": dict(grid_n=1024, dq=0.125, dt=5e-3, t_final=56.0),
    "wigner1": dict(grid_n=400, dq=0.225, dp=0.045, dt=0.04, t_final=56.0, n_particles=10**7),
    "wigner2": dict(grid_n=400, dq=0.225, dp=0.045, dt=0.04, t_final=56.0),
    "tomogram-char": dict(grid_n=1201, dq=0.05, dt=0.04, t_final=56.0, n_particles=12000),
    "tomogram-sde": dict(grid_n=1201, dq=0.05, dt=0.04, t_final=8.0, n_particles=2000, series_every=2.0),
}
_DESK = {
    "chebyshev": dict(grid_n=512, dq=0.16),
    "cranknicolson": dict(grid_n=512, dq=0.16),
    "linprop": dict(grid_n=512, dq=0.125, t_final=8.0),
    "wigner1": dict(grid_n=200, dp=0.06, n_particles=10**6),
    "wigner2": dict(grid_n=200, dp=0.06),
    "tomogram-char": dict(series_every=0.8),
    "tomogram-sde": dict(n_particles=500),
}
_COMMON = dict(series_every=0.4, snapshot_every=8.0, seed=0, workers=1, out_dir="qdyn_out", preset="desk")

_INT_KEYS = ("grid_n", "n_particles", "seed", "workers")
_FLOAT_KEYS = ("dq", "dp", "dt", "t_final", "series_every", "snapshot_every")
_CHOICES = {"potential": POTENTIALS, "method": METHODS, "preset": PRESETS, "reference": METHODS}


@dataclass(frozen=True)
class RunConfig:
    """Scenario description; ``None`` means "use the method default"."""

    potential: Optional[str] = None
    method: Optional[str] = None
    preset: Optional[str] = None
    grid_n: Optional[int] = None
    dq: Optional[float] = None
    dp: Optional[float] = None
    dt: Optional[float] = None
    t_final: Optional[float] = None
    series_every: Optional[float] = None
    snapshot_every: Optional[float] = None
    n_particles: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    out_dir: Optional[str] = None
    reference: Optional[str] = None

    @classmethod
    def keys(cls):
        return tuple(f.name for f in fields(cls))

    def resolved(self) -> "RunConfig":
        """Copy with every unset field filled from the method and preset defaults."""
        for key in REQUIRED:
            if getattr(self, key) is None:
                raise ConfigError(f"missing required key '{key}'")
        vals = method_defaults(self.method, self.preset or _COMMON["preset"])
        vals.update({k: v for k, v in dataclasses.asdict(self).items() if v is not None})
        out = RunConfig(**{k: vals.get(k) for k in self.keys()})
        out.validate()
        return out

    def validate(self) -> None:
        for key in _INT_KEYS:
            v = getattr(self, key)
            if v is not None and (v < 0 or (v == 0 and key != "seed")):
                raise ConfigError(f"'{key}' must be positive, got {v}")
        for key in _FLOAT_KEYS:
            v = getattr(self, key)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigError(f"'{key}' must be positive, got {v}")


def method_defaults(method: str, preset: str = "desk") -> dict:
    if method not in METHODS:
        raise ConfigError(f"unknown method '{method}'")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}'")
    vals = dict(_COMMON, preset=preset)
    vals.update(_FULL[method])
    if preset == "desk":
        vals.update(_DESK.get(method, {}))
    return vals


def _convert(key: str, raw: str, where: str):
    raw = raw.strip()
    if raw == "":
        raise ConfigError(f"{where}: empty value for '{key}'")
    if key in _INT_KEYS:
        try:
            f = float(raw)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse '{raw}' as an integer for '{key}'") from None
        if not f.is_integer():
            raise ConfigError(f"{where}: '{key}' must be an integer, got '{raw}'")
        return int(f)
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse '{raw}' as a number for '{key}'") from None
    if key in _CHOICES and raw not in _CHOICES[key]:
        raise ConfigError(f"{where}: invalid value '{raw}' for '{key}'; expected one of {', '.join(_CHOICES[key])}")
    return raw


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; errors name the key and line number."""
    vals = {}
    known = RunConfig.keys()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got '{body}'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in known:
            raise ConfigError(f"{where}: unknown key '{key}'")
        if key in vals:
            raise ConfigError(f"{where}: duplicate key '{key}'")
        vals[key] = _convert(key, raw, where)
    cfg = RunConfig(**vals)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def parse_config(path) -> RunConfig:
    p = Path(path)
    return parse_config_text(p.read_text(), str(p))


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Command-line values (strings or typed) take precedence over the file."""
    known = RunConfig.keys()
    vals = {}
    for key, raw in overrides.items():
        if raw is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown key '{key}'")
        vals[key] = _convert(key, str(raw), f"flag --{key.replace('_', '-')}")
    out = dataclasses.replace(cfg, **vals)
    out.validate()
    return out


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config_text`; unset fields are omitted."""
    lines = []
    for key in RunConfig.keys():
        v = getattr(cfg, key)
        if v is None:
            continue
        lines.append(f"{key} = {repr(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"
