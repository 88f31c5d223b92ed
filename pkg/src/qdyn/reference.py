"""Quasi-exact reference propagators for the grid Hamiltonian.

Three routes to exp(-i H t / hbar) psi on the same 3-point grid Hamiltonian:
a Chebyshev polynomial expansion, the Crank-Nicolson (Cayley) scheme and a
full diagonalization used as an oracle on small grids.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .core import (
    Grid1D,
    PotentialSpec,
    WaveField,
    apply_tridiagonal,
    hamiltonian_diagonals,
    spectral_bounds,
)
from .errors import BoundaryLeakError, BoundaryLeakWarning, NumericalInstabilityError, SizeError

__all__ = [
    "bessel_j_sequence",
    "chebyshev_order",
    "ChebyshevPlan",
    "plan_chebyshev",
    "chebyshev_step",
    "crank_nicolson_step",
    "CrankNicolsonSolver",
    "DiagOracle",
    "build_diag_oracle",
    "diag_propagate",
    "check_boundary",
]

logger = logging.getLogger(__name__)

MAX_ORDER = 10**6
_BIG = 1e250


def _start_index(x: float, kmin: int) -> int:
    """Recurrence start well inside the decay regime of J_k(x)."""
    k = max(kmin, int(x)) + 20
    # (e x / 2k)^k / sqrt(2 pi k) < 1e-60 puts the start far below double precision
    while k * math.log(max(math.e * x / (2.0 * k), 1e-300)) - 0.5 * math.log(2 * math.pi * k) > -138.0:
        k += 10
    return k


def bessel_j_sequence(x: float, kmax: int) -> np.ndarray:
    """J_0(x) .. J_kmax(x) for x >= 0 by Miller's downward recurrence.

    The recurrence J_{k-1} = (2k/x) J_k - J_{k+1} is run from an index where the
    true values are negligible, rescaled on overflow, and normalized with
    J_0 + 2 sum_k J_2k = 1.
    """
    if x < 0:
        raise ValueError("x must be non-negative")
    out = np.zeros(kmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    n = _start_index(x, kmax)
    vals = np.zeros(n + 2)
    vals[n] = 1e-300
    for k in range(n, 0, -1):
        vals[k - 1] = (2.0 * k / x) * vals[k] - vals[k + 1]
        if abs(vals[k - 1]) > _BIG:
            vals[k - 1 :] /= _BIG
    norm = vals[0] + 2.0 * vals[2::2].sum()
    vals /= norm
    out[:] = vals[: kmax + 1]
    return out


def chebyshev_order(x: float, cutoff: float = 1e-16, max_order: int = MAX_ORDER):
    """Minimal M with |J_k(x)| < cutoff for all k > M, and J_0..J_M.

    Raises NumericalInstabilityError when M would exceed ``max_order``.
    """
    if not (0 < cutoff <= 1e-8):
        raise ValueError("cutoff must lie in (0, 1e-8]")
    if x > max_order:
        raise NumericalInstabilityError(f"expansion order for argument {x:g} exceeds cap {max_order}")
    kmax = int(x) + 10
    while True:
        log_tail = kmax * math.log(max(math.e * x / (2.0 * kmax), 1e-300)) - 0.5 * math.log(2 * math.pi * kmax)
        if kmax > x and log_tail < math.log(cutoff) - 7.0:
            break
        kmax += 10
    if kmax > max_order + 50:
        raise NumericalInstabilityError(f"expansion order exceeds cap {max_order}")
    j = bessel_j_sequence(x, kmax)
    above = np.nonzero(np.abs(j) >= cutoff)[0]
    M = int(above.max()) if above.size else 0
    if M > max_order:
        raise NumericalInstabilityError(f"expansion order {M} exceeds cap {max_order}")
    return M, j[: M + 1]


@dataclass(frozen=True, eq=False)
class ChebyshevPlan:
    """Rescaling and expansion coefficients for one time step."""

    a: float
    b: float
    alpha: float
    dt: float
    M: int
    coeffs: np.ndarray
    cutoff: float
    E_min: float
    E_max: float
    hbar: float = 1.0

    @property
    def argument(self) -> float:
        return self.a * self.dt / self.hbar


def plan_chebyshev(
    spec: PotentialSpec,
    grid: Grid1D,
    dt: float,
    cutoff: float = 1e-16,
    alpha: float = 0.01,
    bounds: str = "gershgorin",
    hbar: float = 1.0,
    max_order: int = MAX_ORDER,
) -> ChebyshevPlan:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    E_min, E_max = spectral_bounds(spec, grid, method=bounds, hbar=hbar)
    width = E_max - E_min
    b = 0.5 * (E_max + E_min)
    a = 0.5 * (width + alpha * width)
    M, j = chebyshev_order(a * dt / hbar, cutoff, max_order)
    coeffs = ((-1j) ** np.arange(M + 1)) * j
    return ChebyshevPlan(a, b, alpha, dt, M, coeffs, cutoff, E_min, E_max, hbar)


def check_boundary(field: WaveField, threshold: float = 1e-8, on_leak: str = "warn") -> None:
    """React to edge amplitudes above ``threshold`` ('ignore', 'warn' or 'raise')."""
    if on_leak == "ignore":
        return
    edge = field.edge_amplitude()
    if edge > threshold:
        msg = f"edge amplitude {edge:.3e} exceeds {threshold:g}"
        if on_leak == "raise":
            raise BoundaryLeakError(msg)
        warnings.warn(msg, BoundaryLeakWarning, stacklevel=3)


def _chebyshev_apply(psi, diag_t, off_t, coeffs):
    v0 = psi.copy()
    acc = coeffs[0] * v0
    if len(coeffs) == 1:
        return acc
    v1 = apply_tridiagonal(diag_t, off_t, v0)
    acc += 2.0 * coeffs[1] * v1
    tmp = np.empty_like(v0)
    for c in coeffs[2:]:
        apply_tridiagonal(diag_t, off_t, v1, out=tmp)
        tmp *= 2.0
        tmp -= v0
        v0, v1, tmp = v1, tmp, v0
        acc += (2.0 * c) * v1
    return acc


def chebyshev_step(
    field: WaveField,
    plan: ChebyshevPlan,
    spec: PotentialSpec,
    leak_threshold: float = 1e-8,
    on_leak: str = "warn",
) -> WaveField:
    """Advance ``field`` by ``plan.dt`` with the truncated Chebyshev series."""
    diag, off = hamiltonian_diagonals(spec, field.grid, plan.hbar)
    diag_t = (diag - plan.b) / plan.a
    off_t = off / plan.a
    acc = _chebyshev_apply(field.amp.astype(complex), diag_t, off_t, plan.coeffs)
    acc *= np.exp(-1j * plan.b * plan.dt / plan.hbar)
    out = WaveField(field.grid, acc)
    check_boundary(out, leak_threshold, on_leak)
    return out


class CrankNicolsonSolver:
    """Banded Cayley form (1 + i H dt / 2hbar) psi' = (1 - i H dt / 2hbar) psi.

    The tridiagonal system is solved from scratch every step; only the band
    storage is kept between steps.
    """

    def __init__(self, spec: PotentialSpec, grid: Grid1D, dt: float, hbar: float = 1.0):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.dt = dt
        self.diag, self.off = hamiltonian_diagonals(spec, grid, hbar)
        self.h = 0.5j * dt / hbar
        ab = np.empty((3, grid.n), dtype=complex)
        ab[0, :] = self.h * self.off
        ab[1, :] = 1.0 + self.h * self.diag
        ab[2, :] = self.h * self.off
        self.ab = ab

    def step(self, psi: np.ndarray) -> np.ndarray:
        rhs = psi - self.h * apply_tridiagonal(self.diag, self.off, psi)
        out = solve_banded((1, 1), self.ab, rhs, check_finite=False)
        if not np.all(np.isfinite(out)):
            raise NumericalInstabilityError("Crank-Nicolson solve produced non-finite values")
        return out


def crank_nicolson_step(field: WaveField, spec: PotentialSpec, dt: float, hbar: float = 1.0) -> WaveField:
    solver = CrankNicolsonSolver(spec, field.grid, dt, hbar)
    return WaveField(field.grid, solver.step(field.amp.astype(complex)))


@dataclass(frozen=True, eq=False)
class DiagOracle:
    """Eigenpairs of the grid Hamiltonian; eigenvectors are the columns of ``vectors``."""

    grid: Grid1D
    energies: np.ndarray
    vectors: np.ndarray
    hbar: float = 1.0


def build_diag_oracle(spec: PotentialSpec, grid: Grid1D, max_n: int = 512, hbar: float = 1.0) -> DiagOracle:
    if grid.n > max_n:
        raise SizeError(f"diagonalization oracle limited to N <= {max_n}, got N = {grid.n}")
    diag, off = hamiltonian_diagonals(spec, grid, hbar)
    energies, vectors = eigh_tridiagonal(diag, np.full(grid.n - 1, off))
    return DiagOracle(grid, energies, vectors, hbar)


def diag_propagate(field: WaveField, oracle: DiagOracle, t: float) -> WaveField:
    """psi(t) = sum_n exp(-i E_n t / hbar) |n><n|psi(0)>."""
    if field.grid != oracle.grid:
        raise ValueError("oracle was built for a different grid")
    V = oracle.vectors
    c = V.T @ field.amp
    return WaveField(field.grid, V @ (np.exp(-1j * oracle.energies * t / oracle.hbar) * c))
