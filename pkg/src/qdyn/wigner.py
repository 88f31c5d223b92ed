"""Wigner-Moyal propagation on phase space.

First order: classical transport of trajectories sampled once from the
initial Wigner function, cloud-in-cell deposition at output times.

Second order: deterministic grid scheme. Every step each lattice node is
transported classically over ``dt``; in addition the node is transported to
the step midpoint, receives every momentum jump ``s`` weighted by
``omega(s, q) ds dt`` and is carried on to the end of the step.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .core import GaussianPacketSpec, PhaseSpaceField, PhaseSpaceGrid, PotentialSpec, init_wigner
from .errors import ClippingWarning, NumericalInstabilityError

__all__ = [
    "TrajectoryEnsemble",
    "WignerSeries",
    "JumpKernel",
    "sample_initial",
    "verlet",
    "classical_step",
    "deposit_cic",
    "wigner_first_order",
    "delta_prime",
    "jump_weight_table",
    "build_jump_kernel",
    "apply_jump_kernel",
    "wigner_second_order",
    "step_indices",
]

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Phase-space points with weights; arrays are shared, never mutated in place."""

    q: np.ndarray
    p: np.ndarray
    weight: np.ndarray
    rng_seed: Optional[int] = None

    def __len__(self) -> int:
        return int(self.q.size)

    def total_weight(self) -> float:
        return float(self.weight.sum())

    def mean(self):
        w = self.weight / self.weight.sum()
        return float(w @ self.q), float(w @ self.p)


@dataclass
class WignerSeries:
    """Snapshots of a phase-space propagation."""

    times: np.ndarray
    fields: List[PhaseSpaceField]
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0))
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.fields)

    def at(self, t: float) -> PhaseSpaceField:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t = {t}")
        return self.fields[i]


def _chunk_sizes(n: int, chunk: int) -> List[int]:
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def sample_initial(initial, n_particles: int, seed: int, chunk_size: int = DEFAULT_CHUNK) -> TrajectoryEnsemble:
    """Draw ``n_particles`` equal-weight trajectories from the initial Wigner function.

    Parameters
    ----------
    initial : GaussianPacketSpec or PhaseSpaceField
        Gaussian packets are sampled exactly (independent normals in q and p).
        A gridded field is sampled cell by cell with a uniform offset inside
        the cell; it must be non-negative.
    seed : int
        Master seed. Each chunk of ``chunk_size`` particles draws from its own
        stream spawned from this seed, so the ensemble does not depend on how
        chunks are later distributed over workers.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be positive")
    sizes = _chunk_sizes(n_particles, chunk_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    if isinstance(initial, GaussianPacketSpec):
        qs, ps = [], []
        for size, ss in zip(sizes, streams):
            rng = np.random.default_rng(ss)
            qs.append(rng.normal(initial.q0, initial.sigma, size))
            ps.append(rng.normal(initial.p0, initial.sigma_p, size))
        q, p = np.concatenate(qs), np.concatenate(ps)
    elif isinstance(initial, PhaseSpaceField):
        w = initial.w
        if np.any(w < 0):
            raise ValueError("cannot sample a Wigner function with negative values")
        prob = (w / w.sum()).ravel()
        qg, pg = initial.grid.qgrid, initial.grid.pgrid
        qs, ps = [], []
        for size, ss in zip(sizes, streams):
            rng = np.random.default_rng(ss)
            cell = rng.choice(prob.size, size=size, p=prob)
            iq, ip = np.divmod(cell, pg.n)
            qs.append(qg.q_min + (iq + rng.uniform(-0.5, 0.5, size)) * qg.dq)
            ps.append(pg.q_min + (ip + rng.uniform(-0.5, 0.5, size)) * pg.dq)
        q, p = np.concatenate(qs), np.concatenate(ps)
    else:
        raise TypeError("initial must be a GaussianPacketSpec or a PhaseSpaceField")
    return TrajectoryEnsemble(q, p, np.full(n_particles, 1.0 / n_particles), seed)


def verlet(q, p, spec: PotentialSpec, dt: float, n_steps: int = 1):
    """Velocity-Verlet (kick-drift-kick) integration; returns new arrays."""
    m = spec.mass
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    f = spec.force(q)
    for _ in range(n_steps):
        p += 0.5 * dt * f
        q += (dt / m) * p
        f = spec.force(q)
        p += 0.5 * dt * f
    return q, p


def classical_step(ens: TrajectoryEnsemble, spec: PotentialSpec, dt: float, n_steps: int = 1) -> TrajectoryEnsemble:
    if not dt > 0:
        raise ValueError("dt must be positive")
    q, p = verlet(ens.q, ens.p, spec, dt, n_steps)
    return TrajectoryEnsemble(q, p, ens.weight, ens.rng_seed)


def _cic_accumulate(q, p, w, psg: PhaseSpaceGrid):
    """Bilinear deposit of weights ``w``; returns (node weights, dropped weight)."""
    qg, pg = psg.qgrid, psg.pgrid
    x = (np.asarray(q) - qg.q_min) / qg.dq
    y = (np.asarray(p) - pg.q_min) / pg.dq
    inside = (x >= 0) & (x <= qg.n - 1) & (y >= 0) & (y <= pg.n - 1)
    dropped = float(w[~inside].sum()) if not inside.all() else 0.0
    x, y, w = x[inside], y[inside], w[inside]
    i = np.minimum(x.astype(np.int64), qg.n - 2)
    j = np.minimum(y.astype(np.int64), pg.n - 2)
    fx, fy = x - i, y - j
    size = qg.n * pg.n
    base = i * pg.n + j
    out = np.bincount(base, w * (1 - fx) * (1 - fy), minlength=size)
    out += np.bincount(base + 1, w * (1 - fx) * fy, minlength=size)
    out += np.bincount(base + pg.n, w * fx * (1 - fy), minlength=size)
    out += np.bincount(base + pg.n + 1, w * fx * fy, minlength=size)
    return out.reshape(qg.n, pg.n), dropped


def deposit_cic(ens: TrajectoryEnsemble, psg: PhaseSpaceGrid, return_dropped: bool = False):
    """Cloud-in-cell deposit of the ensemble; field values are weight per cell area.

    Particles outside the lattice are dropped; their weight is returned when
    ``return_dropped`` is set.
    """
    nodes, dropped = _cic_accumulate(ens.q, ens.p, ens.weight, psg)
    if dropped:
        logger.debug("CIC deposit dropped weight %.3e", dropped)
    fld = PhaseSpaceField(psg, nodes / psg.cell_area)
    return (fld, dropped) if return_dropped else fld


def step_indices(times: Sequence[float], dt: float) -> np.ndarray:
    """Map output times onto integer step counts; they must be multiples of ``dt``."""
    t = np.asarray(times, dtype=float)
    k = np.rint(t / dt).astype(np.int64)
    if np.any(np.abs(k * dt - t) > 1e-9 * np.maximum(1.0, np.abs(t))) or np.any(k < 0):
        raise ValueError("output times must be non-negative multiples of dt")
    return k


def _w1_chunk(args):
    size, ss, initial, spec, psg, dt, steps = args
    rng = np.random.default_rng(ss)
    q = rng.normal(initial.q0, initial.sigma, size)
    p = rng.normal(initial.p0, initial.sigma_p, size)
    w = np.full(size, 1.0)
    out, lost = [], []
    done = 0
    for k in steps:
        if k > done:
            q, p = verlet(q, p, spec, dt, int(k - done))
            done = k
        nodes, dropped = _cic_accumulate(q, p, w, psg)
        out.append(nodes)
        lost.append(dropped)
    return out, lost


def wigner_first_order(
    initial: GaussianPacketSpec,
    spec: PotentialSpec,
    psg: PhaseSpaceGrid,
    n_particles: int = 10**7,
    dt: float = 0.04,
    t_final: float = 56.0,
    seed: int = 0,
    output_times: Optional[Sequence[float]] = None,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> WignerSeries:
    """Lowest-order Wigner propagation by classical trajectories.

    Initial conditions are sampled once; trajectories are transported
    continuously and deposited only at output times. Chunks are processed in a
    fixed order, so the result is independent of ``workers``.
    """
    if output_times is None:
        output_times = [t_final]
    steps = step_indices(output_times, dt)
    if np.any(np.diff(steps) < 0):
        raise ValueError("output times must be sorted")
    sizes = _chunk_sizes(n_particles, chunk_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(s, ss, initial, spec, psg, dt, steps) for s, ss in zip(sizes, streams)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_w1_chunk, jobs))
    else:
        results = [_w1_chunk(j) for j in jobs]
    fields, dropped = [], []
    scale = 1.0 / (n_particles * psg.cell_area)
    for idx in range(len(steps)):
        acc = np.zeros(psg.shape)
        lost = 0.0
        for out, lo in results:
            acc += out[idx]
            lost += lo[idx]
        fields.append(PhaseSpaceField(psg, acc * scale))
        dropped.append(lost / n_particles)
    return WignerSeries(steps * dt, fields, np.asarray(dropped), {"n_particles": n_particles, "seed": seed})


# --- second order ---------------------------------------------------------


def delta_prime(s, sigma: float):
    """Derivative of a normalized Gaussian of width ``sigma``: ``-s exp(-s^2/2sigma^2) / (sqrt(2 pi) sigma^3)``."""
    s = np.asarray(s, dtype=float)
    return -s * np.exp(-(s**2) / (2 * sigma**2)) / (math.sqrt(2 * math.pi) * sigma**3)


def jump_weight_table(
    spec: PotentialSpec,
    s,
    q,
    q_cut: float,
    sigma_delta: float,
    hbar: float = 1.0,
    dq_prime: Optional[float] = None,
    regularization: str = "consistent",
) -> np.ndarray:
    """omega(s, q) on the tensor grid ``s x q``; shape ``(len(s), len(q))``.

    The integral term is a trapezoid sum over ``|q'| <= q_cut``. With
    ``regularization='consistent'`` its integrand carries the window
    ``exp(-2 sigma^2 q'^2 / hbar^2)``, i.e. the integral term is smoothed in
    ``s`` by the same Gaussian that regularizes the delta derivative, so the
    two classical-force pieces cancel for linear and quadratic potentials.
    ``'plain'`` leaves the integral unsmoothed.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    smax = float(np.max(np.abs(s))) if s.size else 0.0
    if dq_prime is None:
        dq_prime = min(0.02, math.pi * hbar / (16.0 * max(smax, 1e-12)))
    nqp = 2 * int(math.ceil(q_cut / dq_prime)) + 1
    qp = np.linspace(-q_cut, q_cut, nqp)
    h = qp[1] - qp[0]
    tw = np.full(nqp, h)
    tw[0] = tw[-1] = 0.5 * h
    if regularization == "consistent":
        tw = tw * np.exp(-2.0 * sigma_delta**2 * qp**2 / hbar**2)
    elif regularization != "plain":
        raise ValueError(f"unknown regularization {regularization!r}")
    V = spec.value(q[None, :] - qp[:, None])
    sines = np.sin(2.0 * np.outer(s, qp) / hbar) * tw
    omega = (2.0 / (math.pi * hbar**2)) * (sines @ V)
    omega += delta_prime(s, sigma_delta)[:, None] * spec.force(q)[None, :]
    return omega


@dataclass(frozen=True, eq=False)
class JumpKernel:
    """Tabulated jump weights and their lattice form.

    ``omega_table[a, k]`` is omega(s_a, q_k). ``lattice[k, d]`` is the weight a
    node in row ``k`` sends to the node ``d - (Np - 1)`` momentum cells away,
    with each jump split linearly between the two nearest nodes.
    """

    psg: PhaseSpaceGrid
    s_grid: np.ndarray
    ds: float
    sigma_delta: float
    q_cut: float
    omega_table: np.ndarray
    lattice: np.ndarray
    regularization: str = "consistent"


def build_jump_kernel(
    spec: PotentialSpec,
    psg: PhaseSpaceGrid,
    q_cut: float = 30.0,
    s_max: Optional[float] = None,
    sigma_delta: Optional[float] = None,
    ds: Optional[float] = None,
    hbar: float = 1.0,
    regularization: str = "consistent",
    dq_prime: Optional[float] = None,
) -> JumpKernel:
    """Tabulate omega(s, q) on the jump lattice and fold it onto momentum cells.

    Defaults: ``sigma_delta = dp``, ``ds = 0.1 dp`` and ``s_max`` half the
    momentum extent. Jumps beyond the momentum extent are clipped with a
    :class:`ClippingWarning`.
    """
    dp = psg.pgrid.dq
    sigma_delta = dp if sigma_delta is None else sigma_delta
    ds = 0.1 * dp if ds is None else ds
    if not (sigma_delta > 0 and ds > 0 and q_cut > 0):
        raise ValueError("sigma_delta, ds and q_cut must be positive")
    limit = psg.pgrid.extent
    if s_max is None:
        s_max = 0.5 * limit
    if s_max > limit:
        warnings.warn(f"s_max = {s_max:g} clipped to momentum extent {limit:g}", ClippingWarning, stacklevel=2)
        s_max = limit
    na = int(math.floor(s_max / ds + 1e-9))
    s = np.arange(-na, na + 1) * ds
    q = psg.qgrid.points
    table = jump_weight_table(spec, s, q, q_cut, sigma_delta, hbar, dq_prime, regularization)
    n = psg.pgrid.n
    d = np.arange(-(n - 1), n)
    hat = np.maximum(0.0, 1.0 - np.abs(d[:, None] - s[None, :] / dp))
    lattice = (table.T * ds) @ hat.T
    return JumpKernel(psg, s, ds, sigma_delta, q_cut, table, lattice, regularization)


def apply_jump_kernel(kernel: JumpKernel, w: np.ndarray) -> np.ndarray:
    """``J(q_k, p_j) = sum_s omega(s, q_k) ds W(q_k, p_j - s)`` on the lattice."""
    n = kernel.psg.pgrid.n
    full = fftconvolve(w, kernel.lattice, mode="full", axes=1)
    return full[:, n - 1 : 2 * n - 1]


def wigner_second_order(
    initial,
    spec: PotentialSpec,
    psg: PhaseSpaceGrid,
    kernel: Optional[JumpKernel] = None,
    dt: float = 0.04,
    t_final: float = 56.0,
    output_times: Optional[Sequence[float]] = None,
    kernel_scale: float = 1.0,
    jumps: bool = True,
    blowup_factor: float = 10.0,
) -> WignerSeries:
    """Second-order Wigner propagation with one midpoint jump per step.

    ``W(t+dt) = T_dt W + dt T_{dt/2} K T_{dt/2} W`` where ``T`` transports
    lattice nodes classically and redeposits them by CIC, and ``K`` applies
    the jump kernel scaled by ``kernel_scale``. ``jumps=False`` gives the
    first-order result of the same grid scheme.

    Raises
    ------
    NumericalInstabilityError
        If the absolute weight exceeds ``blowup_factor`` times its initial value.
    """
    if isinstance(initial, GaussianPacketSpec):
        W = init_wigner(initial, psg).w.copy()
    elif isinstance(initial, PhaseSpaceField):
        if initial.grid != psg:
            raise ValueError("initial field lives on a different grid")
        W = np.array(initial.w, dtype=float)
    else:
        raise TypeError("initial must be a GaussianPacketSpec or a PhaseSpaceField")
    if jumps and kernel is None:
        kernel = build_jump_kernel(spec, psg)
    if output_times is None:
        output_times = [t_final]
    steps = step_indices(output_times, dt)
    if np.any(np.diff(steps) < 0):
        raise ValueError("output times must be sorted")

    area = psg.cell_area
    Q, P = np.meshgrid(psg.qgrid.points, psg.pgrid.points, indexing="ij")
    Q, P = Q.ravel(), P.ravel()
    q_full, p_full = verlet(Q, P, spec, dt)
    q_half, p_half = verlet(Q, P, spec, 0.5 * dt)
    w0 = np.abs(W).sum()
    fields, dropped, times = [], [], []
    lost = 0.0
    k_out = 0
    for k in range(int(steps.max()) + 1 if steps.size else 0):
        while k_out < steps.size and steps[k_out] == k:
            fields.append(PhaseSpaceField(psg, W))
            dropped.append(lost)
            times.append(k * dt)
            k_out += 1
        if k == steps.max():
            break
        mass = W.ravel() * area
        new, lo = _cic_accumulate(q_full, p_full, mass, psg)
        lost += lo
        if jumps and kernel_scale != 0.0:
            mid, _ = _cic_accumulate(q_half, p_half, mass, psg)
            J = apply_jump_kernel(kernel, mid / area) * (kernel_scale * dt)
            # jumped weight sits on lattice nodes at the midpoint; carry it over the second half
            add, lo = _cic_accumulate(q_half, p_half, J.ravel() * area, psg)
            new += add
            lost += lo
        W = new / area
        total = np.abs(W).sum()
        if not np.isfinite(total) or total > blowup_factor * w0:
            raise NumericalInstabilityError(
                f"second-order weight blew up at t = {(k + 1) * dt:g}: sum|W| = {total:.3e} vs initial {w0:.3e}"
            )
    return WignerSeries(np.asarray(times), fields, np.asarray(dropped), {"kernel_scale": kernel_scale})
