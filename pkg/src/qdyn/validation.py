"""Argument checks shared by estimators, config parsing and the CLI."""
from __future__ import annotations

import numbers
import os

import numpy as np

from .core import GaussianPacketSpec, Grid1D, PhaseSpaceGrid, PotentialSpec

__all__ = [
    "check_positive",
    "check_count",
    "check_times",
    "check_potential",
    "check_grid",
    "check_is_fitted",
    "resolve_workers",
    "default_packet",
    "check_phase_space_grid",
]


def check_positive(value, name: str, allow_zero: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    v = float(value)
    if not np.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value!r}")
    return v


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, numbers.Real) and float(value).is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_times(times) -> np.ndarray:
    """Non-negative, sorted 1-D array of output times."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("times must be finite and non-negative")
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be sorted")
    return t


def check_potential(spec) -> PotentialSpec:
    if spec is None:
        return PotentialSpec.barrier()
    if not isinstance(spec, PotentialSpec):
        raise TypeError("potential must be a PotentialSpec")
    return spec


def check_grid(grid, kind=Grid1D):
    if not isinstance(grid, kind):
        raise TypeError(f"expected a {kind.__name__}, got {type(grid).__name__}")
    return grid


def check_is_fitted(est, attr: str = "initial_") -> None:
    if not hasattr(est, attr):
        raise RuntimeError(f"{type(est).__name__} is not fitted yet; call fit(initial) first")


def resolve_workers(requested: int | None = None) -> int:
    """Worker count capped by the ``QDYN_THREADS`` environment variable."""
    n = (os.cpu_count() or 1) if requested is None else int(requested)
    env = os.environ.get("QDYN_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ValueError(f"QDYN_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ValueError("QDYN_THREADS must be >= 1")
        n = min(n, cap)
    return max(1, n)


def default_packet(packet) -> GaussianPacketSpec:
    if packet is None:
        return GaussianPacketSpec()
    if not isinstance(packet, GaussianPacketSpec):
        raise TypeError("initial state must be a GaussianPacketSpec")
    return packet


def check_phase_space_grid(psg) -> PhaseSpaceGrid:
    return check_grid(psg, PhaseSpaceGrid)
