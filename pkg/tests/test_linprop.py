import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import free_packet_amplitude, refined_density
from qdyn.core import GaussianPacketSpec, Grid1D, PotentialSpec, WaveField, init_wavefunction
from qdyn.errors import CourantError, CourantWarning, GridError
from qdyn.linprop import (
    courant_dt,
    linear_trajectory,
    linprop_action_phase,
    linprop_prefactor,
    linprop_step,
    momentum_grid,
    plan_linprop,
)

BENCHMARKS = {
    "barrier": PotentialSpec.barrier,
    "well": PotentialSpec.well,
    "quartic": PotentialSpec.quartic,
    "doublewell": PotentialSpec.doublewell,
}

# --- Courant bound -------------------------------------------------------------


def test_courant_free_limit():
    g = Grid1D.centered(128, 0.125)
    assert courant_dt(PotentialSpec.free(), g) == pytest.approx(g.dq**2 / (2 * math.pi), rel=1e-14)


def test_courant_small_slope_series():
    # the bound is continuous as s -> 0
    q = np.linspace(-20, 20, 401)
    g = Grid1D.centered(128, 0.125)
    tiny = PotentialSpec.tabulated(q, 1e-9 * q)
    assert courant_dt(tiny, g) == pytest.approx(g.dq**2 / (2 * math.pi), rel=1e-8)


@pytest.mark.parametrize("key", ["barrier_512", "well_1024", "quartic_512", "doublewell_256"])
def test_courant_matches_frozen(frozen, key):
    name, n = key.split("_")
    g = Grid1D.centered(int(n), 0.125)
    assert courant_dt(BENCHMARKS[name](), g) == pytest.approx(frozen["courant_dt_dq0125"][key], rel=1e-12)


@given(
    st.sampled_from(sorted(BENCHMARKS)),
    st.sampled_from([64, 128, 256, 512]),
    st.floats(0.03, 0.25),
)
def test_fastest_trajectory_stays_in_half_cell(name, n, dq):
    spec = BENCHMARKS[name]()
    g = Grid1D.centered(n, dq)
    dt = courant_dt(spec, g)
    pmax = math.pi / dq
    s = spec.slope(g.points)
    for p0 in (pmax, -pmax):
        q, _ = linear_trajectory(g.points, p0, s, dt)
        assert np.abs(q - g.points).max() <= 0.5 * dq * (1 + 1e-12)


def test_courant_rejection_names_bound(barrier):
    g = Grid1D.centered(512, 0.125)
    bound = courant_dt(barrier, g)
    with pytest.raises(CourantError, match=f"{bound:.6g}"):
        plan_linprop(barrier, g, 1.01 * bound)
    plan_linprop(barrier, g, bound)


def test_courant_opt_out_warns(barrier):
    g = Grid1D.centered(128, 0.125)
    with pytest.warns(CourantWarning):
        plan = plan_linprop(barrier, g, 5e-3, enforce_courant=False)
    assert plan.dt == 5e-3


def test_small_published_step_respects_bound():
    g = Grid1D.centered(256, 0.125)
    assert 1e-4 <= courant_dt(PotentialSpec.doublewell(), g)


# --- trajectory and action -------------------------------------------------------


def test_trajectory_limits():
    assert linear_trajectory(1.5, 0.0, 0.0, 2.0) == (1.5, 0.0)
    q, p = linear_trajectory(1.5, 0.7, 0.0, 2.0)
    assert q == pytest.approx(1.5 + 1.4) and p == 0.7


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3), st.floats(1e-3, 2.0))
def test_trajectory_conserves_energy(q0, p0, s, dt):
    q, p = linear_trajectory(q0, p0, s, dt)
    e0 = 0.5 * p0**2 + s * q0
    assert 0.5 * p**2 + s * q == pytest.approx(e0, abs=1e-12 * max(1.0, abs(e0), p0**2, abs(s * q0)))


def test_free_action():
    q0, p0, dt = 0.3, 1.7, 0.25
    assert linprop_action_phase(q0, p0, 0.0, dt) == pytest.approx(p0**2 * dt / 2, rel=1e-14)


@pytest.mark.parametrize("q0,p0,s,dt", [(0.0, 1.0, 0.5, 0.3), (-2.0, -0.4, -1.3, 1.1), (4.0, 2.5, 3.0, 0.05)])
def test_action_matches_numeric_integral(q0, p0, s, dt):
    def lagrangian(t):
        q, p = linear_trajectory(q0, p0, s, t)
        return 0.5 * p**2 - s * q

    S, _ = quad(lagrangian, 0.0, dt, epsabs=1e-13, epsrel=1e-13)
    assert linprop_action_phase(q0, p0, s, dt) == pytest.approx(S, abs=1e-10)


def test_prefactor():
    for dt in (0.01, 0.5, 3.0):
        k = linprop_prefactor(dt)
        assert abs(k) == pytest.approx(math.sqrt(1 / (2 * math.pi * dt)), rel=1e-14)
        assert cmath.phase(k) == pytest.approx(-math.pi / 4)
    with pytest.raises(ZeroDivisionError):
        linprop_prefactor(0.0)
    with pytest.raises(ZeroDivisionError):
        linprop_action_phase(0.0, 1.0, 0.0, 0.0)


def test_momentum_grid():
    g = Grid1D.centered(128, 0.125)
    pg = momentum_grid(g)
    assert pg.dq == pytest.approx(2 * math.pi / (128 * 0.125))
    assert pg.q_min == pytest.approx(-math.pi / 0.125)
    assert pg.q_max < math.pi / 0.125


def test_fourier_limit_checked(barrier):
    g = Grid1D.centered(128, 1.0)
    with pytest.raises(GridError):
        plan_linprop(barrier, g, 0.01, p0_max=4.0)


# --- one-step propagation ----------------------------------------------------------


def test_free_step_matches_analytic():
    free = PotentialSpec.free()
    pk = GaussianPacketSpec(0.0, 1.0, 1 / math.sqrt(2))
    g = Grid1D.centered(256, 0.125)
    dt = courant_dt(free, g)
    out = linprop_step(init_wavefunction(pk, g), plan_linprop(free, g, dt))
    exact = np.abs(free_packet_amplitude(g.points, dt, pk)) ** 2
    assert np.abs(out.density() - exact).max() < 1e-6


def test_harmonic_hundred_steps(packet):
    h = PotentialSpec.harmonic()
    g = Grid1D.centered(256, 0.125)
    plan = plan_linprop(h, g, courant_dt(h, g))
    psi = init_wavefunction(packet, g)
    for _ in range(100):
        psi = linprop_step(psi, plan)
    t = 100 * plan.dt
    ref = refined_density(h, g, t, refine=8, dt=t)
    assert np.abs(psi.density() - ref).max() < 1e-3


def test_linearity(barrier):
    g = Grid1D.centered(128, 0.125)
    plan = plan_linprop(barrier, g, courant_dt(barrier, g))
    rng = np.random.default_rng(3)
    a = WaveField(g, rng.normal(size=128) + 1j * rng.normal(size=128))
    b = WaveField(g, rng.normal(size=128) + 1j * rng.normal(size=128))
    al, be = 0.3 - 1.2j, 2.0 + 0.5j
    lhs = linprop_step(WaveField(g, al * a.amp + be * b.amp), plan).amp
    rhs = al * linprop_step(a, plan).amp + be * linprop_step(b, plan).amp
    assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(lhs).max()


def test_composition_on_constant_slope():
    q = np.linspace(-30, 30, 601)
    ramp = PotentialSpec.tabulated(q, 0.3 * q + 0.5)
    g = Grid1D.centered(256, 0.125)
    psi = init_wavefunction(GaussianPacketSpec(0.0, 1.0, 1 / math.sqrt(2)), g)
    dt = courant_dt(ramp, g)
    one = linprop_step(psi, plan_linprop(ramp, g, dt))
    half = plan_linprop(ramp, g, dt / 2)
    two = linprop_step(linprop_step(psi, half), half)
    assert np.abs(one.amp - two.amp).max() < 1e-8


def test_norm_drift_per_step(barrier, packet):
    g = Grid1D.centered(512, 0.125)
    plan = plan_linprop(barrier, g, courant_dt(barrier, g))
    psi = init_wavefunction(packet, g)
    for _ in range(50):
        nxt = linprop_step(psi, plan)
        assert abs(nxt.norm2() - psi.norm2()) < 1e-4
        psi = nxt


def test_cic_shape_close_to_ngp(barrier, packet):
    g = Grid1D.centered(256, 0.125)
    dt = courant_dt(barrier, g)
    psi = init_wavefunction(packet, g)
    a = linprop_step(psi, plan_linprop(barrier, g, dt, shape="ngp"))
    b = linprop_step(psi, plan_linprop(barrier, g, dt, shape="cic"))
    assert np.abs(a.density() - b.density()).max() < 1e-2
    assert abs(b.norm2() - 1) < 1e-2


def test_plan_argument_checks(barrier):
    g = Grid1D.centered(64, 0.125)
    with pytest.raises(ValueError):
        plan_linprop(barrier, g, 0.0)
    with pytest.raises(ValueError):
        plan_linprop(barrier, g, 1e-3, shape="gaussian")
    with pytest.raises(ValueError):
        plan_linprop(barrier, g, 1e-3, threshold=-1)
    plan = plan_linprop(barrier, g, 1e-3)
    with pytest.raises(GridError):
        linprop_step(init_wavefunction(GaussianPacketSpec(), Grid1D.centered(128, 0.125)), plan)


def test_dropping_small_sources_changes_fringes(barrier, packet):
    """Discarding low-amplitude sources leaves a visible trace in the interference region."""
    g = Grid1D.centered(512, 0.125)
    dt = courant_dt(barrier, g)
    full = plan_linprop(barrier, g, dt)
    cut = plan_linprop(barrier, g, dt, threshold=1e-6)
    a = b = init_wavefunction(packet, g)
    for _ in range(int(8.0 / dt)):
        a, b = linprop_step(a, full), linprop_step(b, cut)
    dev = np.abs(a.density() - b.density())
    assert dev.max() > 1e-7


def test_work_count_quadratic(barrier):
    counts = []
    for n in (128, 256, 512):
        g = Grid1D.centered(n, 0.125)
        counts.append(plan_linprop(barrier, g, courant_dt(barrier, g)).contributions_per_step)
    assert counts == [128**2, 256**2, 512**2]
