"""Densities, partial norms, reduced means, Wigner transforms and error metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import ndtr

from .core import GaussianPacketSpec, Grid1D, PhaseSpaceField, PhaseSpaceGrid, PotentialSpec, WaveField, apply_hamiltonian

__all__ = [
    "ObservableRecord",
    "partial_norms",
    "reduced_means",
    "observables_from_density",
    "wavefield_energy",
    "wigner_energy",
    "momentum_density",
    "wigner_from_wavefunction",
    "compare_fields",
    "ellipse_transmission_oracle",
    "NORM_FLOOR",
]

NORM_FLOOR = 1e-6


@dataclass(frozen=True)
class ObservableRecord:
    """Observables at one time; undefined reduced means are ``None``."""

    t: float
    norm: float
    N_minus: float
    N_plus: float
    q_mean_minus: Optional[float]
    q_mean_plus: Optional[float]
    energy: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def _as_axis(grid_or_x):
    if isinstance(grid_or_x, Grid1D):
        return grid_or_x.points
    x = np.asarray(grid_or_x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("coordinate axis must be a 1-D array of at least two points")
    return x


def _split_trapezoid(x, y):
    """Trapezoid integrals of the piecewise-linear ``y(x)`` over ``x < 0`` and ``x > 0``."""
    y = np.asarray(y, dtype=float)
    h = np.diff(x)
    cell = 0.5 * h * (y[:-1] + y[1:])
    left = x[1:] <= 0
    right = x[:-1] >= 0
    neg = cell[left].sum()
    pos = cell[right].sum()
    for i in np.nonzero(~left & ~right)[0]:
        x0, x1, y0, y1 = x[i], x[i + 1], y[i], y[i + 1]
        y_zero = y0 + (y1 - y0) * (0.0 - x0) / (x1 - x0)
        neg += 0.5 * (0.0 - x0) * (y0 + y_zero)
        pos += 0.5 * (x1 - 0.0) * (y_zero + y1)
    return float(neg), float(pos)


def partial_norms(density, grid) -> Tuple[float, float]:
    """Weight on the negative and positive half-axis (trapezoid rule, exact split at 0)."""
    x = _as_axis(grid)
    return _split_trapezoid(x, density)


def reduced_means(density, grid, floor: float = NORM_FLOOR):
    """Half-axis normalized first moments; ``None`` where the partial norm is below ``floor``."""
    x = _as_axis(grid)
    d = np.asarray(density, dtype=float)
    n_minus, n_plus = _split_trapezoid(x, d)
    m_minus, m_plus = _split_trapezoid(x, x * d)
    lo = None if n_minus <= floor else m_minus / n_minus
    hi = None if n_plus <= floor else m_plus / n_plus
    return lo, hi


def observables_from_density(t: float, density, grid, energy: Optional[float] = None, floor: float = NORM_FLOOR):
    x = _as_axis(grid)
    n_minus, n_plus = partial_norms(density, x)
    lo, hi = reduced_means(density, x, floor)
    return ObservableRecord(float(t), n_minus + n_plus, n_minus, n_plus, lo, hi, energy)


def wavefield_energy(field: WaveField, spec: PotentialSpec, hbar: float = 1.0) -> float:
    """``<psi|H|psi> / <psi|psi>`` for the grid Hamiltonian."""
    hpsi = apply_hamiltonian(field, spec, hbar).amp
    return float(np.real(np.vdot(field.amp, hpsi)) / np.real(np.vdot(field.amp, field.amp)))


def wigner_energy(fld: PhaseSpaceField, spec: PotentialSpec) -> float:
    """Phase-space average of ``p^2/2m + V(q)`` normalized by the total weight."""
    q = fld.grid.qgrid.points
    p = fld.grid.pgrid.points
    h = p[None, :] ** 2 / (2.0 * spec.mass) + spec.value(q)[:, None]
    total = fld.w.sum()
    return float((h * fld.w).sum() / total) if total != 0 else float("nan")


def momentum_density(field: WaveField, pgrid: Grid1D, hbar: float = 1.0) -> np.ndarray:
    """``|psi(p)|^2`` with ``psi(p) = (2 pi hbar)^{-1/2} sum_i dq exp(-i p q_i / hbar) psi(q_i)``."""
    q = field.grid.points
    phase = np.exp(-1j * np.outer(pgrid.points, q) / hbar)
    amp = phase @ field.amp * field.grid.dq / math.sqrt(2 * math.pi * hbar)
    return np.abs(amp) ** 2


def wigner_from_wavefunction(field: WaveField, psg: PhaseSpaceGrid, hbar: float = 1.0) -> PhaseSpaceField:
    """Wigner transform of a grid wave function evaluated on ``psg``.

    The eta integral is a sum over ``eta = 2 j dq / hbar`` so both
    ``q +- eta hbar / 2`` fall on grid nodes. Rows are then taken directly
    when ``psg`` nodes coincide with wave-function nodes and otherwise
    interpolated with a cubic spline along ``q``.
    """
    g = field.grid
    n = g.n
    psi = field.amp
    jmax = n - 1
    j = np.arange(-jmax, jmax + 1)
    k = np.arange(n)[:, None]
    hi, lo = k + j[None, :], k - j[None, :]
    ok = (hi >= 0) & (hi < n) & (lo >= 0) & (lo < n)
    corr = np.where(ok, np.conj(psi[np.clip(lo, 0, n - 1)]) * psi[np.clip(hi, 0, n - 1)], 0.0)
    deta = 2.0 * g.dq / hbar
    p = psg.pgrid.points
    phase = np.exp(-1j * np.outer(j * deta, p))
    W = (corr @ phase).real * deta / (2.0 * math.pi)
    qt = psg.qgrid.points
    idx = (qt - g.q_min) / g.dq
    near = np.rint(idx)
    if np.all(np.abs(idx - near) < 1e-9) and near.min() >= 0 and near.max() <= n - 1:
        rows = W[near.astype(int)]
    else:
        inside = (qt >= g.q_min) & (qt <= g.q_max)
        rows = np.zeros((qt.size, p.size))
        rows[inside] = CubicSpline(g.points, W, axis=0)(qt[inside])
    return PhaseSpaceField(psg, rows)


def _metrics(diff, measure):
    a = np.abs(diff)
    return {
        "L1": float(a.sum() * measure),
        "L2": float(math.sqrt((a**2).sum() * measure)),
        "Linf": float(a.max()) if a.size else 0.0,
    }


def compare_fields(candidate, reference) -> dict:
    """Error norms between two states on the same grid.

    Wave fields are compared through their densities (and additionally by
    the fidelity ``|<ref|cand>|^2``); phase-space fields through their values.
    """
    if isinstance(candidate, WaveField) and isinstance(reference, WaveField):
        if candidate.grid != reference.grid:
            raise ValueError("fields live on different grids")
        out = _metrics(candidate.density() - reference.density(), candidate.grid.dq)
        overlap = np.vdot(reference.amp, candidate.amp) * candidate.grid.dq
        out["fidelity"] = float(abs(overlap) ** 2)
        return out
    if isinstance(candidate, PhaseSpaceField) and isinstance(reference, PhaseSpaceField):
        if candidate.grid != reference.grid:
            raise ValueError("fields live on different grids")
        return _metrics(candidate.w - reference.w, candidate.grid.cell_area)
    raise TypeError("compare_fields needs two WaveFields or two PhaseSpaceFields")


def ellipse_transmission_oracle(packet: GaussianPacketSpec, spec: PotentialSpec) -> float:
    """Initial Wigner weight outside the ellipse ``p^2/2m + m omega0^2 q^2 / 2 = V0``.

    The barrier's own contribution to the energy is neglected. The momentum
    integral is done in closed form, the remaining coordinate integral by
    adaptive quadrature.
    """
    m, w0, V0 = spec.mass, spec.omega0, spec.V0
    if V0 <= 0:
        return 1.0
    if w0 == 0:
        raise ValueError("ellipse oracle needs a harmonic background (omega0 > 0)")
    q_e = math.sqrt(2.0 * V0 / (m * w0**2))
    sq, sp = packet.sigma, packet.sigma_p

    def inside(q):
        pe = math.sqrt(max(0.0, 2.0 * m * (V0 - 0.5 * m * w0**2 * q * q)))
        frac = ndtr((pe - packet.p0) / sp) - ndtr((-pe - packet.p0) / sp)
        return math.exp(-((q - packet.q0) ** 2) / (2 * sq**2)) / (math.sqrt(2 * math.pi) * sq) * frac

    lo = max(-q_e, packet.q0 - 40 * sq)
    hi = min(q_e, packet.q0 + 40 * sq)
    if lo >= hi:
        return 1.0
    val, _ = integrate.quad(inside, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400, points=[packet.q0] if lo < packet.q0 < hi else None)
    return float(min(1.0, max(0.0, 1.0 - val)))
