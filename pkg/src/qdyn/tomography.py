"""Tomographic propagation.

The tomogram ``w(X, mu, nu)`` is the Radon transform of the Wigner function
along the lines ``mu q + nu p = X``. For a locally harmonic potential it is
conserved along straight characteristics in ``(X, mu, nu)`` space, which this
module composes step by step using the potential expansion at co-propagated
auxiliary classical trajectories. A stochastic (Kolmogorov) formulation with
Cholesky-factored diffusion is provided as an alternative mode.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import map_coordinates

from .core import GaussianPacketSpec, Grid1D, PhaseSpaceField, PhaseSpaceGrid, PotentialSpec
from .errors import DegenerateFrameError, NumericalInstabilityError
from .wigner import step_indices, verlet

__all__ = [
    "radon_transform",
    "inverse_radon",
    "HarmonicFrameMap",
    "frame_functions",
    "harmonic_frame_step",
    "local_frame_map",
    "TomSeries",
    "tomographic_evolve_characteristics",
    "DriftDiffusion",
    "drift_diffusion_estimate",
    "cholesky_psd",
    "stochastic_step",
    "tomographic_evolve_sde",
    "kinetic_energy_from_tomogram",
    "gaussian_tomogram",
]

logger = logging.getLogger(__name__)


def _check_frame(mu, nu):
    if mu == 0 and nu == 0:
        raise DegenerateFrameError("tomographic frame (mu, nu) = (0, 0) is degenerate")


def gaussian_tomogram(X, center, width):
    X = np.asarray(X, dtype=float)
    return np.exp(-((X - center) ** 2) / (2.0 * width**2)) / (math.sqrt(2.0 * math.pi) * width)


# --- Radon transform ------------------------------------------------------


def radon_transform(
    wigner: Union[PhaseSpaceField, Callable],
    mu: float,
    nu: float,
    X_grid: Grid1D,
    psg: Optional[PhaseSpaceGrid] = None,
    du: Optional[float] = None,
    order: int = 1,
) -> np.ndarray:
    """Line integrals of W along ``mu q + nu p = X`` for every ``X`` of ``X_grid``.

    ``wigner`` is either a gridded field (interpolated with spline ``order``,
    1 = linear) or a callable ``W(q, p)`` evaluated directly, in which case
    ``psg`` bounds the integration window. The quadrature runs along the
    line direction with trapezoid spacing ``du``.
    """
    _check_frame(mu, nu)
    if isinstance(wigner, PhaseSpaceField):
        psg = wigner.grid
    elif psg is None:
        raise ValueError("a callable Wigner function needs psg for the integration window")
    qg, pg = psg.qgrid, psg.pgrid
    r = math.hypot(mu, nu)
    if du is None:
        du = 0.5 * min(qg.dq, pg.dq)
    # half-length of the line segment crossing the bounding box
    corners_q = np.array([qg.q_min, qg.q_max])
    corners_p = np.array([pg.q_min, pg.q_max])
    half = math.hypot(np.abs(corners_q).max(), np.abs(corners_p).max())
    nu_pts = 2 * int(math.ceil(half / du)) + 1
    u = np.linspace(-half, half, nu_pts)
    h = u[1] - u[0]
    tw = np.full(nu_pts, h)
    tw[0] = tw[-1] = 0.5 * h
    X = X_grid.points
    q = (X[:, None] * mu / r**2) - u[None, :] * nu / r
    p = (X[:, None] * nu / r**2) + u[None, :] * mu / r
    if isinstance(wigner, PhaseSpaceField):
        coords = np.stack([(q - qg.q_min) / qg.dq, (p - pg.q_min) / pg.dq])
        vals = map_coordinates(wigner.w, coords.reshape(2, -1), order=order, mode="constant", cval=0.0)
        vals = vals.reshape(q.shape)
    else:
        inside = (q >= qg.q_min) & (q <= qg.q_max) & (p >= pg.q_min) & (p <= pg.q_max)
        vals = np.where(inside, wigner(q, p), 0.0)
    return (vals @ tw) / r


def _ramlak(n: int, tau: float) -> np.ndarray:
    k = np.arange(-(n - 1), n)
    h = np.zeros(k.size)
    h[k == 0] = 1.0 / (4.0 * tau**2)
    odd = (k % 2) != 0
    h[odd] = -1.0 / (np.pi**2 * tau**2 * k[odd] ** 2)
    return h


def inverse_radon(
    tomograms: np.ndarray,
    X_grid: Grid1D,
    thetas: np.ndarray,
    psg: PhaseSpaceGrid,
    center: Tuple[float, float] = (0.0, 0.0),
) -> PhaseSpaceField:
    """Filtered back-projection from frames ``(mu, nu) = (cos theta, sin theta)``.

    Parameters
    ----------
    tomograms : array, shape (n_theta, n_X)
        ``w(X, cos theta_i, sin theta_i)`` sampled on ``X_grid`` with ``X``
        measured relative to ``center``, i.e. ``X = mu (q - q_c) + nu (p - p_c)``.
    thetas : array
        Angles spread uniformly over ``[0, pi)``.
    """
    tom = np.asarray(tomograms, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if tom.shape != (thetas.size, X_grid.n):
        raise ValueError("tomograms must have shape (len(thetas), X_grid.n)")
    if thetas.size < 8:
        warnings.warn("fewer than 8 frames: back-projection is poorly conditioned", UserWarning, stacklevel=2)
    tau = X_grid.dq
    h = _ramlak(X_grid.n, tau)
    filtered = np.stack([np.convolve(row, h, mode="full")[X_grid.n - 1 : 2 * X_grid.n - 1] * tau for row in tom])
    qq = psg.qgrid.points[:, None] - center[0]
    pp = psg.pgrid.points[None, :] - center[1]
    xs = X_grid.points
    W = np.zeros(psg.shape)
    for th, row in zip(thetas, filtered):
        W += np.interp(qq * math.cos(th) + pp * math.sin(th), xs, row, left=0.0, right=0.0)
    W *= math.pi / thetas.size
    return PhaseSpaceField(psg, W)


# --- harmonic frame maps --------------------------------------------------


def frame_functions(lam, t):
    """``C = cos(sqrt(lam) t)``, ``S = sin(sqrt(lam) t)/sqrt(lam)``, ``Cm = (C - 1)/lam``.

    Negative ``lam`` continues to cosh/sinh; small ``|lam| t^2`` uses series.
    """
    lam = np.asarray(lam, dtype=float)
    x = lam * t * t
    k = np.sqrt(np.abs(lam))
    small = np.abs(x) < 1e-4
    safe_k = np.where(small, 1.0, k)
    safe_lam = np.where(small, 1.0, lam)
    C = np.where(lam > 0, np.cos(safe_k * t), np.cosh(safe_k * t))
    S = np.where(lam > 0, np.sin(safe_k * t), np.sinh(safe_k * t)) / safe_k
    Cm = (C - 1.0) / safe_lam
    C = np.where(small, 1.0 - x / 2.0 + x * x / 24.0 - x**3 / 720.0, C)
    S = np.where(small, t * (1.0 - x / 6.0 + x * x / 120.0 - x**3 / 5040.0), S)
    Cm = np.where(small, t * t * (-0.5 + x / 24.0 - x * x / 720.0 + x**3 / 40320.0), Cm)
    return C, S, Cm


@dataclass(frozen=True)
class HarmonicFrameMap:
    """Frame map of the harmonic propagator ``V = m omega^2 (q - q_c)^2 / 2`` over ``dt``.

    Stored as ``omega_sq`` (may be negative) and the force offset
    ``f = m omega^2 q_c``, which stays finite as ``omega -> 0``.
    """

    omega_sq: float
    f: float
    dt: float
    mass: float = 1.0

    @classmethod
    def from_center(cls, omega0: float, q_c: float, dt: float, mass: float = 1.0, omega_sq: Optional[float] = None):
        lam = omega0**2 if omega_sq is None else omega_sq
        return cls(lam, mass * lam * q_c, dt, mass)

    @property
    def q_c(self) -> float:
        return self.f / (self.mass * self.omega_sq) if self.omega_sq != 0 else math.inf

    def matrix(self):
        """(2x2 frame matrix, 2-vector) with ``(mu, nu) -> M (mu, nu)`` and ``X -> X + h . (mu, nu)``."""
        C, S, Cm = (float(v) for v in frame_functions(self.omega_sq, self.dt))
        m = self.mass
        M = np.array([[C, m * self.omega_sq * S], [-S / m, C]])
        h = np.array([self.f * Cm / m, self.f * S])
        return M, h


def harmonic_frame_step(z, fmap: HarmonicFrameMap):
    """Advance ``z = (X, mu, nu)`` (shape (3,) or (n, 3)) along the harmonic characteristics.

    ``mu(t) = mu0 C + nu0 m omega^2 S``, ``nu(t) = nu0 C - mu0 S / m`` and
    ``X(t) = X0 + f (mu0 Cm / m + nu0 S)``, which integrates
    ``dX/dt = f nu``, ``dmu/dt = m omega^2 nu``, ``dnu/dt = -mu / m``.
    """
    z = np.asarray(z, dtype=float)
    X, mu, nu = z[..., 0], z[..., 1], z[..., 2]
    C, S, Cm = frame_functions(fmap.omega_sq, fmap.dt)
    m = fmap.mass
    out = np.empty_like(z)
    out[..., 0] = X + fmap.f * (mu * Cm / m + nu * S)
    out[..., 1] = mu * C + nu * m * fmap.omega_sq * S
    out[..., 2] = nu * C - mu * S / m
    return out


def local_frame_map(spec: PotentialSpec, q, dt: float):
    """Frame-map parameters (omega^2, f) of the quadratic expansion of V around ``q``.

    ``omega^2 = V''(q) / m`` and ``f = V''(q) q - V'(q)``; vanishing curvature
    reduces to the constant-force limit automatically.
    """
    q = np.asarray(q, dtype=float)
    curv = spec.curvature(q)
    return curv / spec.mass, curv * q - spec.slope(q)


def _frame_arrays(lam, f, dt, mass):
    C, S, Cm = frame_functions(lam, dt)
    n = np.broadcast(lam, f).shape
    M = np.empty(n + (2, 2))
    M[..., 0, 0] = C
    M[..., 0, 1] = mass * lam * S
    M[..., 1, 0] = -S / mass
    M[..., 1, 1] = C
    h = np.stack([f * Cm / mass, f * S * np.ones(n)], axis=-1)
    return M, h


@dataclass
class TomSeries:
    """Densities in a fixed output frame at a set of times."""

    times: np.ndarray
    x: np.ndarray
    densities: list
    diverged_fraction: np.ndarray
    frame: Tuple[float, float] = (1.0, 0.0)
    info: dict = field(default_factory=dict)

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.densities[i]


def _mixture_density(x, centers, widths, weights, block: int = 2048):
    out = np.zeros_like(x)
    for a in range(0, centers.size, block):
        c, w, g = centers[a : a + block], widths[a : a + block], weights[a : a + block]
        out += (g / (math.sqrt(2 * math.pi) * w)) @ np.exp(-((x[None, :] - c[:, None]) ** 2) / (2 * w[:, None] ** 2))
    return out


def _initial_frame_params(packet, M, c, frame):
    """Initial frame, offset and Gaussian parameters that map onto ``frame`` at the current time."""
    mr, nr = frame
    # det M = 1, so the inverse is the adjugate
    mu0 = M[:, 1, 1] * mr - M[:, 0, 1] * nr
    nu0 = -M[:, 1, 0] * mr + M[:, 0, 0] * nr
    d = c[:, 0] * mu0 + c[:, 1] * nu0
    center = mu0 * packet.q0 + nu0 * packet.p0 + d
    width = np.sqrt(nu0**2 * packet.sigma_p**2 + mu0**2 * packet.sigma**2)
    return center, width


def tomographic_evolve_characteristics(
    initial: GaussianPacketSpec,
    spec: PotentialSpec,
    n_traj: int = 12000,
    dt: float = 0.04,
    t_final: float = 56.0,
    seed: int = 0,
    output_times: Optional[Sequence[float]] = None,
    x_grid: Optional[Grid1D] = None,
    window: float = 1e3,
    frame: Tuple[float, float] = (1.0, 0.0),
) -> TomSeries:
    """Propagate the tomogram along characteristics of locally harmonic potentials.

    Each trajectory owns an auxiliary phase-space point sampled from the
    initial Wigner function. Per step the potential is expanded to second
    order at the auxiliary position at the step midpoint, the corresponding
    frame map is composed onto the trajectory's accumulated map, and the
    auxiliary point is advanced classically (no back action).

    At output times the accumulated map is inverted for the output ``frame``;
    every trajectory contributes the initial Gaussian tomogram in the frame
    it maps from, with weight ``1/n_traj``. A trajectory whose tomogram centre
    or shift leaves ``|X| <= window`` (or turns non-finite) is flagged
    diverged for good and excluded.
    """
    _check_frame(*frame)
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    if output_times is None:
        output_times = [t_final]
    steps = step_indices(output_times, dt)
    if x_grid is None:
        x_grid = Grid1D.centered(1201, 0.05)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    qa = rng.normal(initial.q0, initial.sigma, n_traj)
    pa = rng.normal(initial.p0, initial.sigma_p, n_traj)
    M = np.tile(np.eye(2), (n_traj, 1, 1))
    c = np.zeros((n_traj, 2))
    diverged = np.zeros(n_traj, dtype=bool)
    weight = np.full(n_traj, 1.0 / n_traj)
    x = x_grid.points
    times, dens, fracs = [], [], []

    def snapshot(k):
        center, width = _initial_frame_params(initial, M, c, frame)
        ok = ~diverged
        times.append(k * dt)
        dens.append(_mixture_density(x, center[ok], width[ok], weight[ok]))
        fracs.append(diverged.mean())

    k_out = 0
    last = int(steps.max()) if steps.size else 0
    for k in range(last + 1):
        while k_out < steps.size and steps[k_out] == k:
            snapshot(k)
            k_out += 1
        if k == last:
            break
        q_mid, _ = verlet(qa, pa, spec, 0.5 * dt)
        lam, f = local_frame_map(spec, q_mid, dt)
        Mk, h = _frame_arrays(lam, f, dt, spec.mass)
        with np.errstate(over="ignore", invalid="ignore"):
            c = c + np.einsum("nij,ni->nj", M, h)
            M = np.einsum("nij,njk->nik", Mk, M)
            center, width = _initial_frame_params(initial, M, c, frame)
            shift = np.abs(center - frame[0] * initial.q0 - frame[1] * initial.p0)
            bad = ~np.isfinite(center) | ~np.isfinite(width) | (np.abs(center) > window) | (shift > window)
        if np.any(bad & ~diverged):
            logger.debug("t=%.3f: %d new diverged trajectories", (k + 1) * dt, int((bad & ~diverged).sum()))
        diverged |= bad
        qa, pa = verlet(qa, pa, spec, dt)
    return TomSeries(np.asarray(times), x, dens, np.asarray(fracs), tuple(frame), {"n_traj": n_traj, "seed": seed})


# --- stochastic (Kolmogorov) formulation ----------------------------------


@dataclass(frozen=True, eq=False)
class DriftDiffusion:
    """Drift ``a``, diffusion ``b = g g^T`` and the Stratonovich drift part ``psi_drift``."""

    a: np.ndarray
    b: np.ndarray
    g: np.ndarray
    psi_drift: Optional[np.ndarray] = None


def cholesky_psd(b, tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``g`` with ``g g^T = b + eps I`` for a positive-semidefinite ``b``.

    ``eps = max(0, -lambda_min) + 1e-12 trace(b)``. A zero matrix gives
    ``g = 0``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``b`` is not symmetric or has an eigenvalue below
        ``-tol * max(1, trace(b))``.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise np.linalg.LinAlgError("b must be a square matrix")
    scale = max(1.0, float(np.abs(b).max()))
    if not np.allclose(b, b.T, rtol=0.0, atol=1e-12 * scale):
        raise np.linalg.LinAlgError("b is not symmetric")
    b = 0.5 * (b + b.T)
    tr = float(np.trace(b))
    if not np.any(b):
        return np.zeros_like(b)
    lam_min = float(np.linalg.eigvalsh(b)[0])
    if lam_min < -tol * max(1.0, tr):
        raise np.linalg.LinAlgError(f"b is indefinite (lambda_min = {lam_min:.3e})")
    eps = max(0.0, -lam_min) + 1e-12 * max(tr, 0.0)
    if eps == 0.0:
        eps = np.finfo(float).tiny
    return np.linalg.cholesky(b + eps * np.eye(b.shape[0]))


def _batched_cholesky(b, tol: float = 1e-10):
    """Vectorized :func:`cholesky_psd` over a stack of matrices (same regularization)."""
    b = np.asarray(b, dtype=float)
    if b.ndim == 2:
        return cholesky_psd(b, tol)
    flat = b.reshape((-1,) + b.shape[-2:])
    flat = 0.5 * (flat + np.swapaxes(flat, -1, -2))
    tr = np.trace(flat, axis1=-2, axis2=-1)
    lam_min = np.linalg.eigvalsh(flat)[:, 0]
    if np.any(lam_min < -tol * np.maximum(1.0, tr)):
        raise np.linalg.LinAlgError("b is indefinite")
    eps = np.maximum(0.0, -lam_min) + 1e-12 * np.maximum(tr, 0.0)
    eps = np.where(eps == 0.0, np.finfo(float).tiny, eps)
    zero = ~np.any(flat, axis=(-2, -1))
    g = np.linalg.cholesky(flat + eps[:, None, None] * np.eye(flat.shape[-1]))
    g[zero] = 0.0
    return g.reshape(b.shape)


def _increments(z, lam, f, dtau, mass):
    """Increments of ``z`` (n, 3) under each of the maps ``(lam_k, f_k)``: shape (n, K, 3)."""
    z = np.atleast_2d(z)
    C, S, Cm = frame_functions(lam, dtau)
    X, mu, nu = z[:, 0:1], z[:, 1:2], z[:, 2:3]
    dX = f[None, :] * (mu * Cm[None, :] / mass + nu * S[None, :])
    dmu = mu * (C[None, :] - 1.0) + nu * mass * lam[None, :] * S[None, :]
    dnu = nu * (C[None, :] - 1.0) - mu * S[None, :] / mass
    return np.stack([dX, dmu, dnu], axis=-1)


def drift_diffusion_estimate(z, spec: PotentialSpec, q_samples, dtau: float, factor: bool = True) -> DriftDiffusion:
    """First and second raw moments of the increment over the sampled expansion points.

    ``a = <dz> / dtau`` and ``b = <dz dz^T> / dtau`` where ``dz`` is the
    increment of ``z`` under the harmonic frame map anchored at each ``q``.
    Accepts a single ``z`` (3,) or a batch (n, 3).
    """
    q_samples = np.atleast_1d(np.asarray(q_samples, dtype=float))
    if q_samples.size == 0:
        raise ValueError("q_samples is empty")
    if not dtau > 0:
        raise ValueError("dtau must be positive")
    single = np.ndim(z) == 1
    lam, f = local_frame_map(spec, q_samples, dtau)
    dz = _increments(z, lam, f, dtau, spec.mass)
    a = dz.mean(axis=1) / dtau
    b = np.einsum("nki,nkj->nij", dz, dz) / (q_samples.size * dtau)
    g = _batched_cholesky(b) if factor else None
    if single:
        return DriftDiffusion(a[0], b[0], None if g is None else g[0])
    return DriftDiffusion(a, b, g)


def _coeff_fn(coeffs):
    if isinstance(coeffs, DriftDiffusion):
        a, g = np.asarray(coeffs.a, float), np.asarray(coeffs.g, float)
        return lambda z: (np.broadcast_to(a, z.shape), np.broadcast_to(g, z.shape + (3,))), True
    return coeffs, False


def stochastic_step(
    z,
    coeffs,
    dtau: float,
    rng: np.random.Generator,
    n_inner: int = 16,
    repeats: int = 1,
    return_info: bool = False,
):
    """One Stratonovich step of ``dz = psi dtau + g(z_bar) dxi``.

    Parameters
    ----------
    z : array (n, 3) or (3,)
    coeffs : DriftDiffusion or callable
        Either constant coefficients, or ``coeffs(z) -> (a, g)`` returning the
        drift (n, 3) and a diffusion factor (n, 3, 3) at the points ``z``.
    n_inner : int
        Size of the antithetic inner ensemble estimating
        ``<g(z_bar) dxi> / dtau``, the term separating ``a`` from ``psi``.
    repeats : int
        Extra corrector passes re-evaluating ``g`` at the refreshed midpoint.

    Rows whose increment is not finite keep their old value and are counted.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    n = z2.shape[0]
    fn, constant = _coeff_fn(coeffs)
    xi = rng.normal(0.0, math.sqrt(dtau), size=(n, 3))
    a, g0 = fn(z2)
    a = np.asarray(a)
    if constant:
        # correction vanishes exactly for state-independent g
        dz = a * dtau + np.einsum("nij,nj->ni", g0, xi)
    else:
        # predictor: drift only, then the diffusion at the predicted midpoint
        g_bar = fn(z2 + 0.5 * a * dtau)[1]
        half = max(1, n_inner // 2)
        corr = np.zeros_like(z2)
        for _ in range(half):
            e = rng.normal(0.0, math.sqrt(dtau), size=(n, 3))
            for sgn in (1.0, -1.0):
                zb = z2 + 0.5 * (a * dtau + sgn * np.einsum("nij,nj->ni", g_bar, e))
                corr += np.einsum("nij,nj->ni", fn(zb)[1], sgn * e)
        corr /= 2 * half * dtau
        psi = a - corr
        dz = psi * dtau + np.einsum("nij,nj->ni", g_bar, xi)
        for _ in range(repeats):
            g_bar = fn(z2 + 0.5 * dz)[1]
            dz = psi * dtau + np.einsum("nij,nj->ni", g_bar, xi)
    bad = ~np.all(np.isfinite(dz), axis=1)
    dz[bad] = 0.0
    out = z2 + dz
    if bad.any():
        logger.warning("stochastic step rejected %d non-finite increments", int(bad.sum()))
    out = out[0] if single else out
    return (out, int(bad.sum())) if return_info else out


def tomographic_evolve_sde(
    initial: GaussianPacketSpec,
    spec: PotentialSpec,
    n_paths: int = 2000,
    dt: float = 0.04,
    t_final: float = 8.0,
    seed: int = 0,
    n_aux: int = 12000,
    n_q: int = 128,
    x_grid: Optional[Grid1D] = None,
    window: float = 1e3,
    n_inner: int = 8,
    repeats: int = 1,
) -> TomSeries:
    """Coordinate density at ``t_final`` from backward stochastic frame paths.

    The auxiliary classical ensemble is run forward and ``n_q`` of its
    positions are stored per step. Paths start at ``(X, mu, nu) = (0, 1, 0)``
    at ``t_final`` and step backward with drift and diffusion estimated from
    the stored positions of that step (maps over ``-dt``). Each path ends at
    an initial frame and X-offset and contributes the initial Gaussian
    tomogram of that frame.
    """
    if x_grid is None:
        x_grid = Grid1D.centered(1201, 0.05)
    n_steps = int(step_indices([t_final], dt)[0])
    root = np.random.SeedSequence(seed)
    aux_ss, path_ss = root.spawn(2)
    rng_aux = np.random.default_rng(aux_ss)
    qa = rng_aux.normal(initial.q0, initial.sigma, n_aux)
    pa = rng_aux.normal(initial.p0, initial.sigma_p, n_aux)
    pick = rng_aux.choice(n_aux, size=min(n_q, n_aux), replace=False)
    history = np.empty((n_steps, pick.size))
    for k in range(n_steps):
        q_mid, _ = verlet(qa, pa, spec, 0.5 * dt)
        history[k] = q_mid[pick]
        qa, pa = verlet(qa, pa, spec, dt)

    rng = np.random.default_rng(path_ss)
    z = np.tile([0.0, 1.0, 0.0], (n_paths, 1))
    alive = np.ones(n_paths, dtype=bool)
    for k in range(n_steps - 1, -1, -1):
        qs = history[k]
        lam, f = local_frame_map(spec, qs, -dt)

        def coeffs(zz, lam=lam, f=f):
            dz = _increments(zz, lam, f, -dt, spec.mass)
            a = dz.mean(axis=1) / dt
            b = np.einsum("nki,nkj->nij", dz, dz) / (qs.size * dt)
            return a, _batched_cholesky(b)

        with np.errstate(over="ignore", invalid="ignore"):
            z_new = stochastic_step(z[alive], coeffs, dt, rng, n_inner=n_inner, repeats=repeats)
        z[alive] = z_new
        bad = ~np.all(np.isfinite(z), axis=1) | (np.abs(z[:, 0]) > window)
        alive &= ~bad
    mu0, nu0, d = z[:, 1], z[:, 2], z[:, 0]
    center = mu0 * initial.q0 + nu0 * initial.p0 - d
    width = np.sqrt(nu0**2 * initial.sigma_p**2 + mu0**2 * initial.sigma**2)
    ok = alive & np.isfinite(center) & (width > 0)
    dens = _mixture_density(x_grid.points, center[ok], width[ok], np.full(ok.sum(), 1.0 / n_paths))
    return TomSeries(
        np.array([n_steps * dt]), x_grid.points, [dens], np.array([1.0 - ok.mean()]), (1.0, 0.0),
        {"n_paths": n_paths, "seed": seed},
    )


def kinetic_energy_from_tomogram(X, w_momentum_frame, mass: float = 1.0) -> float:
    """``(1/2m) int X^2 w(X, 0, 1) dX`` by the trapezoid rule."""
    X = np.asarray(X, dtype=float)
    return float(np.trapezoid(X**2 * np.asarray(w_momentum_frame, dtype=float), X) / (2.0 * mass))
