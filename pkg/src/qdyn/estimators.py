"""Estimator-style front ends for the propagators.

Every propagator follows the same protocol: hyper-parameters are set in
``__init__`` (and exposed by ``get_params``/``set_params``), ``fit(initial)``
validates them against an initial state and precomputes plans, and
``predict(times)`` returns the propagated states at the requested times.
``observables(times)`` reduces those states to :class:`ObservableRecord`.
"""
from __future__ import annotations

from typing import List

import numpy as np
from sklearn.base import BaseEstimator

from .core import GaussianPacketSpec, Grid1D, PhaseSpaceField, PhaseSpaceGrid, WaveField, init_wavefunction
from .linprop import courant_dt, linprop_step, plan_linprop
from .observables import observables_from_density, wavefield_energy, wigner_energy
from .reference import (
    CrankNicolsonSolver,
    build_diag_oracle,
    chebyshev_step,
    diag_propagate,
    plan_chebyshev,
)
from .tomography import tomographic_evolve_characteristics, tomographic_evolve_sde
from .validation import (
    check_count,
    check_is_fitted,
    check_positive,
    check_potential,
    check_times,
    default_packet,
    resolve_workers,
)
from .wigner import build_jump_kernel, step_indices, wigner_first_order, wigner_second_order

__all__ = [
    "ChebyshevPropagator",
    "CrankNicolsonPropagator",
    "DiagonalizationPropagator",
    "LinearizedPropagator",
    "WignerFirstOrder",
    "WignerSecondOrder",
    "TomographicPropagator",
]


class _WavePropagator(BaseEstimator):
    """Shared plumbing for propagators acting on a grid wave function."""

    def _setup_grid(self, initial):
        if isinstance(initial, WaveField):
            self.grid_ = initial.grid
            self.initial_ = initial
        else:
            packet = default_packet(initial)
            check_count(self.n, "n", 3)
            check_positive(self.dq, "dq")
            self.grid_ = Grid1D.centered(self.n, self.dq, self.center)
            self.initial_ = init_wavefunction(packet, self.grid_)
        self.potential_ = check_potential(self.potential)

    def _advance(self, psi: WaveField, n_steps: int) -> WaveField:
        raise NotImplementedError

    def predict(self, times) -> List[WaveField]:
        """Wave functions at ``times`` (sorted, multiples of ``dt``)."""
        check_is_fitted(self)
        t = check_times(times)
        steps = step_indices(t, self.dt_)
        out, psi, done = [], self.initial_, 0
        for k in steps:
            psi = self._advance(psi, int(k - done))
            done = int(k)
            out.append(psi)
        return out

    def observables(self, times):
        states = self.predict(times)
        return [
            observables_from_density(t, s.density(), s.grid, wavefield_energy(s, self.potential_))
            for t, s in zip(check_times(times), states)
        ]


class ChebyshevPropagator(_WavePropagator):
    """Chebyshev expansion of the short-time propagator (quasi-exact reference).

    Parameters
    ----------
    potential : PotentialSpec, optional
        Defaults to the barrier.
    n, dq, center : grid used when ``fit`` receives a packet.
    dt : float
        Expansion step.
    cutoff : float
        Coefficient cutoff fixing the expansion order.
    on_leak : {'warn', 'raise', 'ignore'}
    """

    def __init__(self, potential=None, n=1024, dq=0.08, center=0.0, dt=0.4, cutoff=1e-16, alpha=0.01, on_leak="warn"):
        self.potential = potential
        self.n = n
        self.dq = dq
        self.center = center
        self.dt = dt
        self.cutoff = cutoff
        self.alpha = alpha
        self.on_leak = on_leak

    def fit(self, initial=None):
        self._setup_grid(initial)
        self.dt_ = check_positive(self.dt, "dt")
        self.plan_ = plan_chebyshev(self.potential_, self.grid_, self.dt_, self.cutoff, self.alpha)
        return self

    def _advance(self, psi, n_steps):
        for _ in range(n_steps):
            psi = chebyshev_step(psi, self.plan_, self.potential_, on_leak=self.on_leak)
        return psi


class CrankNicolsonPropagator(_WavePropagator):
    """Second-order Cayley-form baseline."""

    def __init__(self, potential=None, n=1024, dq=0.08, center=0.0, dt=0.01):
        self.potential = potential
        self.n = n
        self.dq = dq
        self.center = center
        self.dt = dt

    def fit(self, initial=None):
        self._setup_grid(initial)
        self.dt_ = check_positive(self.dt, "dt")
        self.solver_ = CrankNicolsonSolver(self.potential_, self.grid_, self.dt_)
        return self

    def _advance(self, psi, n_steps):
        a = np.array(psi.amp, dtype=complex)
        for _ in range(n_steps):
            a = self.solver_.step(a)
        return WaveField(psi.grid, a)


class DiagonalizationPropagator(_WavePropagator):
    """Exact propagation by full diagonalization; limited to small grids."""

    def __init__(self, potential=None, n=128, dq=0.32, center=0.0, max_n=512):
        self.potential = potential
        self.n = n
        self.dq = dq
        self.center = center
        self.max_n = max_n

    def fit(self, initial=None):
        self._setup_grid(initial)
        self.oracle_ = build_diag_oracle(self.potential_, self.grid_, self.max_n)
        return self

    def predict(self, times):
        check_is_fitted(self)
        return [diag_propagate(self.initial_, self.oracle_, t) for t in check_times(times)]


class LinearizedPropagator(_WavePropagator):
    """Linearized semiclassical propagator.

    ``dt=None`` selects the Courant bound of the grid; an explicit ``dt``
    above that bound is rejected at ``fit``.
    """

    def __init__(self, potential=None, n=512, dq=0.125, center=0.0, dt=None, shape="ngp", threshold=0.0,
                 enforce_courant=True):
        self.potential = potential
        self.n = n
        self.dq = dq
        self.center = center
        self.dt = dt
        self.shape = shape
        self.threshold = threshold
        self.enforce_courant = enforce_courant

    def fit(self, initial=None):
        self._setup_grid(initial)
        bound = courant_dt(self.potential_, self.grid_)
        self.dt_ = bound if self.dt is None else check_positive(self.dt, "dt")
        p_max = initial.p0 if isinstance(initial, GaussianPacketSpec) else None
        self.plan_ = plan_linprop(self.potential_, self.grid_, self.dt_, self.shape, self.threshold, p0_max=p_max,
                                  enforce_courant=self.enforce_courant)
        return self

    def _advance(self, psi, n_steps):
        for _ in range(n_steps):
            psi = linprop_step(psi, self.plan_)
        return psi


class _WignerBase(BaseEstimator):
    def _setup(self, initial):
        self.initial_ = initial if isinstance(initial, PhaseSpaceField) else default_packet(initial)
        self.potential_ = check_potential(self.potential)
        self.dt_ = check_positive(self.dt, "dt")
        self.psg_ = PhaseSpaceGrid.centered(
            check_count(self.nq, "nq", 3), check_positive(self.dq, "dq"),
            check_count(self.np_, "np_", 3), check_positive(self.dp, "dp"),
        )

    def observables(self, times):
        out = []
        for t, f in zip(check_times(times), self.predict(times)):
            out.append(observables_from_density(t, f.q_marginal(), f.grid.qgrid, wigner_energy(f, self.potential_)))
        return out


class WignerFirstOrder(_WignerBase):
    """Classical transport of Monte Carlo samples of the initial Wigner function."""

    def __init__(self, potential=None, nq=200, dq=0.225, np_=200, dp=0.06, n_particles=10**6, dt=0.04, seed=0,
                 workers=1):
        self.potential = potential
        self.nq = nq
        self.dq = dq
        self.np_ = np_
        self.dp = dp
        self.n_particles = n_particles
        self.dt = dt
        self.seed = seed
        self.workers = workers

    def fit(self, initial=None):
        self._setup(initial)
        if isinstance(self.initial_, PhaseSpaceField) and self.initial_.grid != self.psg_:
            raise ValueError("initial field lives on a different grid")
        self.n_particles_ = check_count(self.n_particles, "n_particles")
        return self

    def predict(self, times) -> List[PhaseSpaceField]:
        check_is_fitted(self)
        t = check_times(times)
        series = wigner_first_order(
            self.initial_, self.potential_, self.psg_, self.n_particles_, self.dt_, float(t[-1]), self.seed,
            output_times=t, workers=resolve_workers(self.workers),
        )
        self.dropped_ = series.dropped
        return series.fields


class WignerSecondOrder(_WignerBase):
    """Grid transport plus one momentum-jump correction per step."""

    def __init__(self, potential=None, nq=200, dq=0.225, np_=200, dp=0.06, dt=0.04, q_cut=30.0, sigma_delta=None,
                 regularization="consistent", kernel_scale=1.0):
        self.potential = potential
        self.nq = nq
        self.dq = dq
        self.np_ = np_
        self.dp = dp
        self.dt = dt
        self.q_cut = q_cut
        self.sigma_delta = sigma_delta
        self.regularization = regularization
        self.kernel_scale = kernel_scale

    def fit(self, initial=None):
        self._setup(initial)
        self.kernel_ = build_jump_kernel(
            self.potential_, self.psg_, q_cut=self.q_cut, sigma_delta=self.sigma_delta,
            regularization=self.regularization,
        )
        return self

    def predict(self, times) -> List[PhaseSpaceField]:
        check_is_fitted(self)
        t = check_times(times)
        series = wigner_second_order(
            self.initial_, self.potential_, self.psg_, self.kernel_, self.dt_, float(t[-1]), output_times=t,
            kernel_scale=self.kernel_scale,
        )
        return series.fields


class TomographicPropagator(BaseEstimator):
    """Tomographic propagation; ``mode`` selects characteristics or stochastic paths.

    ``predict`` returns coordinate densities sampled on ``x_grid_``.
    """

    def __init__(self, potential=None, mode="characteristics", n_traj=12000, dt=0.04, seed=0, x_n=1201, x_dx=0.05,
                 window=1e3, n_aux=12000, n_q=128, n_inner=8):
        self.potential = potential
        self.mode = mode
        self.n_traj = n_traj
        self.dt = dt
        self.seed = seed
        self.x_n = x_n
        self.x_dx = x_dx
        self.window = window
        self.n_aux = n_aux
        self.n_q = n_q
        self.n_inner = n_inner

    def fit(self, initial=None):
        if self.mode not in ("characteristics", "sde"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.initial_ = default_packet(initial)
        self.potential_ = check_potential(self.potential)
        self.dt_ = check_positive(self.dt, "dt")
        check_count(self.n_traj, "n_traj")
        check_positive(self.window, "window")
        self.x_grid_ = Grid1D.centered(check_count(self.x_n, "x_n", 3), check_positive(self.x_dx, "x_dx"))
        return self

    def predict(self, times) -> List[np.ndarray]:
        check_is_fitted(self)
        t = check_times(times)
        if self.mode == "characteristics":
            s = tomographic_evolve_characteristics(
                self.initial_, self.potential_, self.n_traj, self.dt_, float(t[-1]), self.seed, output_times=t,
                x_grid=self.x_grid_, window=self.window,
            )
            self.diverged_fraction_ = s.diverged_fraction
            return list(s.densities)
        out, frac = [], []
        for tk in t:
            if tk == 0:
                out.append(self.initial_.density(self.x_grid_.points))
                frac.append(0.0)
                continue
            s = tomographic_evolve_sde(
                self.initial_, self.potential_, self.n_traj, self.dt_, float(tk), self.seed, self.n_aux, self.n_q,
                self.x_grid_, self.window, self.n_inner,
            )
            out.append(s.densities[0])
            frac.append(float(s.diverged_fraction[0]))
        self.diverged_fraction_ = np.asarray(frac)
        return out

    def observables(self, times):
        return [
            observables_from_density(t, d, self.x_grid_, None) for t, d in zip(check_times(times), self.predict(times))
        ]
