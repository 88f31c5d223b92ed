"""Linearized semiclassical propagator.

Within every grid cell the potential is replaced by its tangent
``V(q) ~ V(q_i) + s_i (q - q_i)``. The propagator of a linear potential is
known in closed form, so each source point contributes exactly one
stationary-phase trajectory per target momentum. Contributions are deposited
on the momentum grid and the wave function is rebuilt by an inverse discrete
Fourier sum.
"""
from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Grid1D, PotentialSpec, WaveField
from .errors import CourantError, CourantWarning, GridError

__all__ = [
    "courant_dt",
    "linear_trajectory",
    "linprop_action_phase",
    "linprop_prefactor",
    "momentum_grid",
    "LinPropPlan",
    "plan_linprop",
    "linprop_step",
]

logger = logging.getLogger(__name__)


def courant_dt(spec: PotentialSpec, grid: Grid1D, hbar: float = 1.0) -> float:
    """Largest step keeping the fastest representable trajectory inside half a cell.

    Uses ``dt = (pi hbar / (|s| dq)) (sqrt(1 + |s| dq^3 m / (pi^2 hbar^2)) - 1)``
    rewritten in a form without cancellation, so ``s = 0`` gives the
    limit ``m dq^2 / (2 pi hbar)`` directly.
    """
    m, dq = spec.mass, grid.dq
    s = np.abs(spec.slope(grid.points))
    x = s * dq**3 * m / (math.pi**2 * hbar**2)
    dt = m * dq**2 / (math.pi * hbar * (np.sqrt(1.0 + x) + 1.0))
    return float(dt.min())


def linear_trajectory(q0, p0, s, dt, mass: float = 1.0):
    """Endpoint of a trajectory under the constant force ``-s``."""
    q = -s * dt**2 / (2.0 * mass) + p0 * dt / mass + q0
    p = p0 - s * dt
    return q, p


def linprop_action_phase(q0, p0, s, dt, mass: float = 1.0, hbar: float = 1.0, offset=0.0):
    """Classical action along the linear-potential trajectory, divided by hbar.

    ``offset`` is the constant part ``c`` of the local potential ``c + s q``;
    it contributes ``-c dt`` to the action.
    """
    if dt == 0:
        raise ZeroDivisionError("linearized propagator is singular at dt = 0")
    q, _ = linear_trajectory(q0, p0, s, dt, mass)
    S = mass * (q - q0) ** 2 / (2.0 * dt) - 0.5 * s * dt * (q + q0) - s**2 * dt**3 / (24.0 * mass)
    return (S - offset * dt) / hbar


def linprop_prefactor(dt, mass: float = 1.0, hbar: float = 1.0) -> complex:
    """``sqrt(m / (2 pi i hbar dt))`` with the phase of ``sqrt(i)`` fixed to pi/4."""
    if dt == 0:
        raise ZeroDivisionError("linearized propagator is singular at dt = 0")
    return math.sqrt(mass / (2.0 * math.pi * hbar * abs(dt))) * cmath.exp(-0.25j * math.pi)


def momentum_grid(grid: Grid1D, hbar: float = 1.0) -> Grid1D:
    """Fourier-conjugate grid ``p_j in [-pi hbar/dq, pi hbar/dq)`` with ``dp = 2 pi hbar / (N dq)``."""
    dp = 2.0 * math.pi * hbar / (grid.n * grid.dq)
    return Grid1D(grid.n, -math.pi * hbar / grid.dq, dp)


@dataclass(frozen=True, eq=False)
class LinPropPlan:
    """Precomputed deposition weights for one time step.

    ``deposit[j, i]`` is the complex weight a unit amplitude at source ``q_i``
    adds to momentum node ``p_j``; ``synth[k, j]`` rebuilds ``psi(q_k)``.
    """

    grid: Grid1D
    pgrid: Grid1D
    dt: float
    slopes: np.ndarray
    offsets: np.ndarray
    shape: str
    threshold: float
    deposit: np.ndarray
    synth: np.ndarray
    hbar: float = 1.0

    @property
    def contributions_per_step(self) -> int:
        """Number of (source, momentum) trajectory contributions in one step."""
        return int(np.count_nonzero(self.deposit))


def _stationary_weights(q, s, c, p0, dt, m, hbar, dq):
    qf, pf = linear_trajectory(q, p0, s, dt, m)
    phase = linprop_action_phase(q, p0, s, dt, m, hbar, offset=c) - pf * qf / hbar
    # prefactor x Gaussian integral over the final coordinate = 1 for a quadratic action
    return pf, np.exp(1j * phase) * dq / math.sqrt(2.0 * math.pi * hbar)


def plan_linprop(
    spec: PotentialSpec,
    grid: Grid1D,
    dt: float,
    shape: str = "ngp",
    threshold: float = 0.0,
    hbar: float = 1.0,
    p0_max: float | None = None,
    enforce_courant: bool = True,
) -> LinPropPlan:
    """Build the one-step plan; rejects ``dt`` above :func:`courant_dt`.

    Parameters
    ----------
    shape : {'ngp', 'cic'}
        Momentum-space shape function. ``ngp`` launches, for every target
        node ``p_j``, the trajectory with initial momentum ``p_j + s_i dt`` so
        that it lands exactly on the node. ``cic`` launches from ``p_j`` and
        splits the off-grid final momentum linearly over the two neighbours.
    threshold : float
        Sources with ``|psi(q_i)| <= threshold`` are skipped (0 keeps all
        non-zero sources).
    p0_max : float, optional
        Largest momentum carried by the state; checked against the Fourier
        limit ``pi hbar / dq``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if shape not in ("ngp", "cic"):
        raise ValueError(f"unknown shape function {shape!r}")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    limit = courant_dt(spec, grid, hbar)
    if dt > limit:
        msg = f"dt = {dt:g} exceeds the Courant bound {limit:.6g} for dq = {grid.dq:g}"
        if enforce_courant:
            raise CourantError(msg)
        warnings.warn(msg, CourantWarning, stacklevel=2)
    pg = momentum_grid(grid, hbar)
    if p0_max is not None and abs(p0_max) > math.pi * hbar / grid.dq:
        raise GridError(f"|p0| = {abs(p0_max):g} beyond the Fourier limit {math.pi * hbar / grid.dq:.6g}")

    m, dq, n = spec.mass, grid.dq, grid.n
    q = grid.points
    s = np.asarray(spec.slope(q), dtype=float)
    c = np.asarray(spec.value(q), dtype=float) - s * q
    p = pg.points

    if shape == "ngp":
        p0 = p[:, None] + s[None, :] * dt
        _, deposit = _stationary_weights(q[None, :], s[None, :], c[None, :], p0, dt, m, hbar, dq)
    else:
        pf, w = _stationary_weights(q[None, :], s[None, :], c[None, :], p[:, None] + 0.0 * s[None, :], dt, m, hbar, dq)
        x = (pf - pg.q_min) / pg.dq
        j0 = np.floor(x).astype(int)
        frac = x - j0
        deposit = np.zeros((n, n), dtype=complex)
        cols = np.broadcast_to(np.arange(n)[None, :], j0.shape)
        for jj, ww in ((j0, 1.0 - frac), (j0 + 1, frac)):
            ok = (jj >= 0) & (jj < n)
            np.add.at(deposit, (jj[ok], cols[ok]), (w * ww)[ok])

    synth = np.exp(1j * q[:, None] * p[None, :] / hbar) * (pg.dq / math.sqrt(2.0 * math.pi * hbar))
    logger.debug("linprop plan: N=%d dt=%g courant=%g shape=%s", n, dt, limit, shape)
    return LinPropPlan(grid, pg, dt, s, c, shape, threshold, deposit, synth, hbar)


def linprop_step(field: WaveField, plan: LinPropPlan) -> WaveField:
    """One step: deposit every source on the momentum grid, then invert the Fourier sum.

    The result is not renormalized; norm drift is a quality measure.
    """
    if field.grid != plan.grid:
        raise GridError("field and plan live on different grids")
    psi = field.amp
    if plan.threshold > 0:
        psi = np.where(np.abs(psi) > plan.threshold, psi, 0.0)
    phi = plan.deposit @ psi
    return WaveField(field.grid, plan.synth @ phi)
