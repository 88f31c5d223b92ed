"""Units, grids, benchmark potentials, the grid Hamiltonian and Gaussian initial states.

All quantities are expressed in reference units of length, mass and time
(u_l, u_m, u_t) with hbar = m = 1 by default.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import BoundaryLeakError, DegenerateFrameError, GridError, OutOfRangeError

__all__ = [
    "SimulationUnits",
    "DEFAULT_UNITS",
    "Grid1D",
    "PhaseSpaceGrid",
    "PotentialSpec",
    "POTENTIAL_KINDS",
    "GaussianPacketSpec",
    "WaveField",
    "PhaseSpaceField",
    "potential_value",
    "potential_slope",
    "potential_curvature",
    "init_wavefunction",
    "init_wigner",
    "init_tomogram",
    "tomogram_density",
    "hamiltonian_diagonals",
    "apply_tridiagonal",
    "apply_hamiltonian",
    "spectral_bounds",
]


@dataclass(frozen=True)
class SimulationUnits:
    """Action and mass scale. Defaults give hbar = u_m u_l^2 / u_t and m = u_m."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError("hbar and mass must be positive")


DEFAULT_UNITS = SimulationUnits()


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``q_i = q_min + i * dq`` for ``i = 0 .. n-1``."""

    n: int
    q_min: float
    dq: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise GridError(f"grid needs n >= 3 points, got {self.n}")
        if not (self.dq > 0 and math.isfinite(self.dq)):
            raise GridError(f"grid spacing must be positive, got {self.dq}")
        if not math.isfinite(self.q_min):
            raise GridError("q_min must be finite")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def centered(cls, n: int, dq: float, center: float = 0.0) -> "Grid1D":
        """Grid of ``n`` points whose node ``n // 2`` sits at ``center``."""
        return cls(n, center - (n // 2) * dq, dq)

    @property
    def points(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n)

    @property
    def q_max(self) -> float:
        return self.q_min + (self.n - 1) * self.dq

    @property
    def extent(self) -> float:
        return (self.n - 1) * self.dq

    def covers(self, lo: float, hi: float) -> bool:
        return self.q_min <= lo and hi <= self.q_max


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Tensor-product lattice of a coordinate and a momentum grid."""

    qgrid: Grid1D
    pgrid: Grid1D

    @classmethod
    def centered(cls, nq: int, dq: float, np_: int, dp: float) -> "PhaseSpaceGrid":
        return cls(Grid1D.centered(nq, dq), Grid1D.centered(np_, dp))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.qgrid.n, self.pgrid.n)

    @property
    def cell_area(self) -> float:
        return self.qgrid.dq * self.pgrid.dq


POTENTIAL_KINDS = ("barrier", "well", "quartic", "doublewell", "harmonic", "free", "tabulated")


@dataclass(frozen=True)
class PotentialSpec:
    """One of the benchmark potentials, a shifted harmonic trap, free space or a table.

    ``barrier``    V1 = m w0^2 q^2 / 2 + V0 exp(-q^2)
    ``well``       V2 = m w0^2 q^2 / 2 - V0 exp(-q^2)
    ``quartic``    V3 = m w0^2 (q^2 + a3 q^4) / 2
    ``doublewell`` V4 = V0 + m w4^2 (-q^2 + a4 q^4) / 2
    ``harmonic``   m w0^2 (q - q_c)^2 / 2
    """

    kind: str
    omega0: float = 0.1
    V0: float = 1.0
    a3: float = 0.01
    omega4: float = 0.4
    a4: float = 0.02
    q_c: float = 0.0
    mass: float = 1.0
    table_q: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    table_v: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.kind == "tabulated":
            if self.table_q is None or self.table_v is None:
                raise ValueError("tabulated potential needs table_q and table_v")
            tq = np.asarray(self.table_q, dtype=float)
            tv = np.asarray(self.table_v, dtype=float)
            if tq.ndim != 1 or tq.shape != tv.shape or tq.size < 4:
                raise ValueError("table_q and table_v must be 1-D arrays of equal length >= 4")
            if np.any(np.diff(tq) <= 0):
                raise ValueError("table_q must be strictly increasing")
            object.__setattr__(self, "_spline", CubicSpline(tq, tv))

    # named constructors -------------------------------------------------
    @classmethod
    def barrier(cls, **kw) -> "PotentialSpec":
        return cls("barrier", **kw)

    @classmethod
    def well(cls, **kw) -> "PotentialSpec":
        return cls("well", **kw)

    @classmethod
    def quartic(cls, **kw) -> "PotentialSpec":
        return cls("quartic", **kw)

    @classmethod
    def doublewell(cls, **kw) -> "PotentialSpec":
        return cls("doublewell", **kw)

    @classmethod
    def harmonic(cls, omega0: float = 0.1, q_c: float = 0.0, **kw) -> "PotentialSpec":
        return cls("harmonic", omega0=omega0, q_c=q_c, **kw)

    @classmethod
    def free(cls, **kw) -> "PotentialSpec":
        return cls("free", **kw)

    @classmethod
    def tabulated(cls, q, v, **kw) -> "PotentialSpec":
        return cls("tabulated", table_q=np.asarray(q, float), table_v=np.asarray(v, float), **kw)

    # analytic value and derivatives -------------------------------------
    def _check_table(self, q):
        tq = self.table_q
        if np.any(q < tq[0]) or np.any(q > tq[-1]):
            raise OutOfRangeError(
                f"q outside tabulated range [{tq[0]}, {tq[-1]}]"
            )

    def value(self, q):
        q = np.asarray(q, dtype=float)
        m, k = self.mass, self.kind
        if k == "barrier":
            return 0.5 * m * self.omega0**2 * q**2 + self.V0 * np.exp(-q**2)
        if k == "well":
            return 0.5 * m * self.omega0**2 * q**2 - self.V0 * np.exp(-q**2)
        if k == "quartic":
            return 0.5 * m * self.omega0**2 * (q**2 + self.a3 * q**4)
        if k == "doublewell":
            return self.V0 + 0.5 * m * self.omega4**2 * (-q**2 + self.a4 * q**4)
        if k == "harmonic":
            return 0.5 * m * self.omega0**2 * (q - self.q_c) ** 2
        if k == "free":
            return np.zeros_like(q)
        self._check_table(q)
        return self._spline(q)

    def slope(self, q):
        """dV/dq (= -F)."""
        q = np.asarray(q, dtype=float)
        m, k = self.mass, self.kind
        if k == "barrier":
            return m * self.omega0**2 * q - 2.0 * q * self.V0 * np.exp(-q**2)
        if k == "well":
            return m * self.omega0**2 * q + 2.0 * q * self.V0 * np.exp(-q**2)
        if k == "quartic":
            return m * self.omega0**2 * (q + 2.0 * self.a3 * q**3)
        if k == "doublewell":
            return m * self.omega4**2 * (-q + 2.0 * self.a4 * q**3)
        if k == "harmonic":
            return m * self.omega0**2 * (q - self.q_c)
        if k == "free":
            return np.zeros_like(q)
        self._check_table(q)
        return self._spline(q, 1)

    def curvature(self, q):
        """d^2V/dq^2."""
        q = np.asarray(q, dtype=float)
        m, k = self.mass, self.kind
        if k == "barrier":
            return m * self.omega0**2 + self.V0 * (4.0 * q**2 - 2.0) * np.exp(-q**2)
        if k == "well":
            return m * self.omega0**2 - self.V0 * (4.0 * q**2 - 2.0) * np.exp(-q**2)
        if k == "quartic":
            return m * self.omega0**2 * (1.0 + 6.0 * self.a3 * q**2)
        if k == "doublewell":
            return m * self.omega4**2 * (-1.0 + 6.0 * self.a4 * q**2)
        if k == "harmonic":
            return np.full_like(q, m * self.omega0**2)
        if k == "free":
            return np.zeros_like(q)
        self._check_table(q)
        return self._spline(q, 2)

    def force(self, q):
        return -self.slope(q)

    def callable(self) -> Callable[[np.ndarray], np.ndarray]:
        return self.value


def potential_value(spec: PotentialSpec, q):
    return spec.value(q)


def potential_slope(spec: PotentialSpec, q):
    return spec.slope(q)


def potential_curvature(spec: PotentialSpec, q):
    return spec.curvature(q)


@dataclass(frozen=True)
class GaussianPacketSpec:
    """Minimum-uncertainty Gaussian wave packet."""

    q0: float = -5.0
    p0: float = 1.0
    sigma: float = 1.0 / math.sqrt(2.0)
    hbar: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def sigma_p(self) -> float:
        return self.hbar / (2.0 * self.sigma)

    def density(self, q):
        q = np.asarray(q, dtype=float)
        return np.exp(-((q - self.q0) ** 2) / (2 * self.sigma**2)) / math.sqrt(2 * math.pi * self.sigma**2)

    def momentum_density(self, p):
        p = np.asarray(p, dtype=float)
        sp = self.sigma_p
        return np.exp(-((p - self.p0) ** 2) / (2 * sp**2)) / math.sqrt(2 * math.pi * sp**2)

    def amplitude(self, q):
        q = np.asarray(q, dtype=float)
        norm = (2 * math.pi * self.sigma**2) ** -0.25
        return norm * np.exp(-((q - self.q0) ** 2) / (4 * self.sigma**2) + 1j * self.p0 * q / self.hbar)

    def wigner(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return np.exp(
            -((q - self.q0) ** 2) / (2 * self.sigma**2) - 2 * self.sigma**2 * (p - self.p0) ** 2 / self.hbar**2
        ) / (math.pi * self.hbar)


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex amplitudes psi(q_i) on a coordinate grid."""

    grid: Grid1D
    amp: np.ndarray

    def __post_init__(self):
        a = np.array(self.amp, dtype=complex)
        if a.shape != (self.grid.n,):
            raise GridError(f"amplitude shape {a.shape} does not match grid of {self.grid.n} points")
        a.setflags(write=False)
        object.__setattr__(self, "amp", a)

    def density(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amp) ** 2) * self.grid.dq)

    def with_amp(self, amp) -> "WaveField":
        return WaveField(self.grid, amp)

    def edge_amplitude(self) -> float:
        return float(max(abs(self.amp[0]), abs(self.amp[-1])))


@dataclass(frozen=True, eq=False)
class PhaseSpaceField:
    """Real (possibly negative) weight per phase-space grid node, indexed ``w[iq, ip]``."""

    grid: PhaseSpaceGrid
    w: np.ndarray

    def __post_init__(self):
        a = np.array(self.w, dtype=float)
        if a.shape != self.grid.shape:
            raise GridError(f"field shape {a.shape} does not match grid {self.grid.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "w", a)

    def total(self) -> float:
        return float(self.w.sum() * self.grid.cell_area)

    def q_marginal(self) -> np.ndarray:
        return self.w.sum(axis=1) * self.grid.pgrid.dq

    def p_marginal(self) -> np.ndarray:
        return self.w.sum(axis=0) * self.grid.qgrid.dq


def _renormalize(values, measure):
    total = np.sum(np.abs(values) ** 2) * measure
    return values / math.sqrt(total)


def init_wavefunction(packet: GaussianPacketSpec, grid: Grid1D, edge_tol: float = 1e-15) -> WaveField:
    """Sample the Gaussian packet on ``grid`` and renormalize it discretely.

    Raises BoundaryLeakError when the analytic amplitude at either grid edge
    exceeds ``edge_tol``.
    """
    edges = np.abs(packet.amplitude(np.array([grid.q_min, grid.q_max])))
    if edges.max() >= edge_tol:
        raise BoundaryLeakError(
            f"grid [{grid.q_min}, {grid.q_max}] too narrow: edge amplitude {edges.max():.3e} >= {edge_tol:g}"
        )
    amp = packet.amplitude(grid.points)
    return WaveField(grid, _renormalize(amp, grid.dq))


def init_wigner(packet: GaussianPacketSpec, psg: PhaseSpaceGrid, n_sigma: float = 5.0) -> PhaseSpaceField:
    """Closed-form initial Wigner function sampled on ``psg`` and renormalized to unit weight."""
    qg, pg = psg.qgrid, psg.pgrid
    sq, sp = packet.sigma, packet.sigma_p
    if not qg.covers(packet.q0 - n_sigma * sq, packet.q0 + n_sigma * sq):
        raise GridError(f"coordinate axis does not cover q0 +- {n_sigma} sigma")
    if not pg.covers(packet.p0 - n_sigma * sp, packet.p0 + n_sigma * sp):
        raise GridError(f"momentum axis does not cover p0 +- {n_sigma} sigma_p")
    w = packet.wigner(qg.points[:, None], pg.points[None, :])
    w = w / (w.sum() * psg.cell_area)
    return PhaseSpaceField(psg, w)


def _check_frame(mu, nu):
    if mu == 0 and nu == 0:
        raise DegenerateFrameError("tomographic frame (mu, nu) = (0, 0) is degenerate")


def init_tomogram(packet: GaussianPacketSpec, mu: float, nu: float) -> Tuple[float, float]:
    """Center and width of the Gaussian initial tomogram in frame (mu, nu)."""
    _check_frame(mu, nu)
    center = mu * packet.q0 + nu * packet.p0
    width = math.sqrt(nu**2 * packet.sigma_p**2 + mu**2 * packet.sigma**2)
    return center, width


def tomogram_density(X, packet: GaussianPacketSpec, mu: float, nu: float):
    """Closed-form initial tomogram w(X, mu, nu, 0)."""
    center, width = init_tomogram(packet, mu, nu)
    X = np.asarray(X, dtype=float)
    return np.exp(-((X - center) ** 2) / (2 * width**2)) / math.sqrt(2 * math.pi * width**2)


def hamiltonian_diagonals(spec: PotentialSpec, grid: Grid1D, hbar: float = 1.0):
    """Main diagonal and (constant) off-diagonal of the 3-point grid Hamiltonian."""
    t = hbar**2 / (2.0 * spec.mass * grid.dq**2)
    diag = 2.0 * t + spec.value(grid.points)
    return diag, -t


def apply_tridiagonal(diag: np.ndarray, off: float, v: np.ndarray, out: Optional[np.ndarray] = None) -> np.ndarray:
    """``H @ v`` for a symmetric tridiagonal H with constant off-diagonal; Dirichlet ends."""
    if out is None:
        out = np.empty_like(v)
    np.multiply(diag, v, out=out)
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def apply_hamiltonian(field: WaveField, spec: PotentialSpec, hbar: float = 1.0) -> WaveField:
    """3-point finite-difference Hamiltonian with psi_0 = psi_{N+1} = 0."""
    diag, off = hamiltonian_diagonals(spec, field.grid, hbar)
    return WaveField(field.grid, apply_tridiagonal(diag, off, field.amp.astype(complex)))


def spectral_bounds(spec: PotentialSpec, grid: Grid1D, method: str = "gershgorin", hbar: float = 1.0):
    """Bounds (E_min, E_max) enclosing the spectrum of the grid Hamiltonian.

    ``gershgorin`` is rigorous and costs O(N). ``exact`` returns the extreme
    eigenvalues from a tridiagonal bisection solve.
    """
    diag, off = hamiltonian_diagonals(spec, grid, hbar)
    if method == "gershgorin":
        radius = np.full(grid.n, 2.0 * abs(off))
        radius[0] = radius[-1] = abs(off)
        return float(np.min(diag - radius)), float(np.max(diag + radius))
    if method == "exact":
        e = np.full(grid.n - 1, off)
        lo = eigh_tridiagonal(diag, e, eigvals_only=True, select="i", select_range=(0, 0))[0]
        hi = eigh_tridiagonal(diag, e, eigvals_only=True, select="i", select_range=(grid.n - 1, grid.n - 1))[0]
        return float(lo), float(hi)
    raise ValueError(f"unknown bounds method {method!r}")
