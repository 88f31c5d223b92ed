import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import chebyshev_run
from qdyn.core import GaussianPacketSpec, Grid1D, PhaseSpaceField, PhaseSpaceGrid, PotentialSpec, WaveField
from qdyn.core import init_wavefunction, init_wigner
from qdyn.observables import (
    NORM_FLOOR,
    ObservableRecord,
    compare_fields,
    ellipse_transmission_oracle,
    momentum_density,
    observables_from_density,
    partial_norms,
    reduced_means,
    wavefield_energy,
    wigner_energy,
    wigner_from_wavefunction,
)

# --- partial norms and reduced means ------------------------------------------------


def test_initial_packet_partial_norms(packet):
    g = Grid1D.centered(1024, 0.08)
    n_minus, n_plus = partial_norms(init_wavefunction(packet, g).density(), g)
    assert n_minus == pytest.approx(1.0, abs=1e-12)
    assert n_plus < 1e-12


def test_symmetric_density_splits_evenly():
    g = Grid1D.centered(401, 0.05)
    d = np.exp(-g.points**2)
    a, b = partial_norms(d, g)
    assert a == pytest.approx(b, rel=1e-14)


def test_split_cell_is_proportional():
    # origin sits inside a cell: linear interpolation splits it exactly for a linear density
    x = np.array([-1.0, -0.25, 0.5, 1.25])
    d = x + 2.0
    lo, hi = partial_norms(d, x)
    assert lo == pytest.approx(1.5, rel=1e-14)  # int_{-1}^0 (x+2) dx
    assert hi == pytest.approx(1.25**2 / 2 + 2 * 1.25, rel=1e-14)


@given(arrays(float, 64, elements=st.floats(0, 10)), st.floats(-3.0, 3.0))
def test_partial_norms_sum_to_total(d, shift):
    g = Grid1D(64, -3.2 + shift, 0.1)
    lo, hi = partial_norms(d, g)
    assert lo + hi == pytest.approx(np.trapezoid(d, g.points), rel=1e-12, abs=1e-12)


def test_initial_reduced_means(packet):
    g = Grid1D.centered(1024, 0.08)
    lo, hi = reduced_means(init_wavefunction(packet, g).density(), g)
    assert lo == pytest.approx(-5.0, abs=1e-10)
    assert hi is None


def test_uniform_reduced_means():
    x = np.linspace(-1, 1, 2001)
    lo, hi = reduced_means(np.ones_like(x), x)
    assert lo == pytest.approx(-0.5, abs=1e-12)
    assert hi == pytest.approx(0.5, abs=1e-12)


@given(st.floats(1e-3, 1e3))
def test_reduced_means_scale_invariant(lam):
    g = Grid1D.centered(801, 0.05)
    d = np.exp(-((g.points - 1.3) ** 2)) + 0.5 * np.exp(-((g.points + 4) ** 2) / 3)
    a = reduced_means(d, g)
    b = reduced_means(lam * d, g)
    assert b[0] == pytest.approx(a[0], abs=1e-12)
    assert b[1] == pytest.approx(a[1], abs=1e-12)


def test_floor_marks_undefined():
    x = np.linspace(-1, 1, 201)
    d = np.where(x < 0, 1.0, 1e-9)
    lo, hi = reduced_means(d, x)
    assert lo is not None and hi is None
    assert reduced_means(d, x, floor=1e-12)[1] is not None
    assert NORM_FLOOR == 1e-6


def test_observable_record(packet, barrier):
    g = Grid1D.centered(1024, 0.08)
    psi = init_wavefunction(packet, g)
    rec = observables_from_density(0.0, psi.density(), g, wavefield_energy(psi, barrier))
    assert isinstance(rec, ObservableRecord)
    assert rec.norm == pytest.approx(1.0, abs=1e-12)
    assert rec.N_minus + rec.N_plus == pytest.approx(rec.norm, abs=1e-12)
    assert set(rec.as_dict()) == {"t", "norm", "N_minus", "N_plus", "q_mean_minus", "q_mean_plus", "energy"}


def test_transmitted_packet_is_faster(barrier):
    g = Grid1D.centered(512, 0.16)
    psi = chebyshev_run(barrier, g, 20.0)
    lo, hi = reduced_means(psi.density(), g)
    assert abs(hi) > abs(lo)


def test_partial_norms_plateau_after_splitting(barrier):
    g = Grid1D.centered(512, 0.16)
    psi = chebyshev_run(barrier, g, 8.0)
    n8 = partial_norms(psi.density(), g)[0]
    psi = chebyshev_run(barrier, g, 28.0)
    n28 = partial_norms(psi.density(), g)[0]
    assert n28 == pytest.approx(n8, abs=0.02)


# --- energies ---------------------------------------------------------------------------


def test_energies(packet, barrier):
    g = Grid1D.centered(1024, 0.08)
    free = PotentialSpec.free()
    psi = init_wavefunction(packet, g)
    # stencil kinetic energy, O(dq^2) below p^2/2m
    assert wavefield_energy(psi, free) == pytest.approx(0.75, rel=2e-3)
    W = init_wigner(packet, PhaseSpaceGrid.centered(200, 0.1, 200, 0.05))
    assert wigner_energy(W, free) == pytest.approx(0.75, rel=1e-6)
    assert wigner_energy(W, barrier) == pytest.approx(wavefield_energy(psi, barrier), rel=5e-3)


def test_momentum_density(packet):
    g = Grid1D.centered(1024, 0.08)
    pg = Grid1D(301, -2.0, 0.02)
    got = momentum_density(init_wavefunction(packet, g), pg)
    assert np.abs(got - packet.momentum_density(pg.points)).max() < 1e-6


# --- Wigner from the wave function -------------------------------------------------------


def test_wigner_from_gaussian_matches_closed_form(packet):
    g = Grid1D.centered(512, 0.1)
    psg = PhaseSpaceGrid(Grid1D(101, -10.0, 0.1), Grid1D(121, -5.0, 0.1))
    W = wigner_from_wavefunction(init_wavefunction(packet, g), psg)
    assert np.abs(W.w - init_wigner(packet, psg).w).max() < 1e-6
    assert W.total() == pytest.approx(1.0, abs=1e-8)


def test_wigner_off_node_rows_are_interpolated(packet):
    g = Grid1D.centered(512, 0.1)
    psg = PhaseSpaceGrid(Grid1D(81, -9.03, 0.1), Grid1D(121, -5.0, 0.1))
    W = wigner_from_wavefunction(init_wavefunction(packet, g), psg)
    assert np.abs(W.w - init_wigner(packet, psg).w).max() < 1e-4


def test_cat_state_has_negative_fringes():
    g = Grid1D.centered(512, 0.1)
    s = 1 / math.sqrt(2)
    a = GaussianPacketSpec(-3.0, 0.0, s).amplitude(g.points) + GaussianPacketSpec(3.0, 0.0, s).amplitude(g.points)
    a = a / math.sqrt((np.abs(a) ** 2).sum() * g.dq)
    psg = PhaseSpaceGrid(Grid1D(161, -8.0, 0.1), Grid1D(121, -6.0, 0.1))
    W = wigner_from_wavefunction(WaveField(g, a), psg)
    Q, P = np.meshgrid(psg.qgrid.points, psg.pgrid.points, indexing="ij")
    norm = 2 * (1 + math.exp(-9 / (2 * s**2)))
    exact = (
        np.exp(-((Q + 3) ** 2) / (2 * s**2) - 2 * s**2 * P**2)
        + np.exp(-((Q - 3) ** 2) / (2 * s**2) - 2 * s**2 * P**2)
        + 2 * np.exp(-(Q**2) / (2 * s**2) - 2 * s**2 * P**2) * np.cos(6 * P)
    ) / (math.pi * norm)
    assert np.abs(W.w - exact).max() < 1e-6
    i0 = int(np.argmin(np.abs(psg.qgrid.points)))
    assert W.w[i0].min() < -0.1
    assert W.total() == pytest.approx(1.0, abs=1e-8)


def test_marginal_identity_on_barrier_snapshot(barrier):
    g = Grid1D.centered(512, 0.16)
    psi = chebyshev_run(barrier, g, 8.0)
    pmax = math.pi / (2 * g.dq)
    n = int(2 * pmax / 0.04)
    psg = PhaseSpaceGrid(g, Grid1D(n, -pmax, 2 * pmax / n))
    W = wigner_from_wavefunction(psi, psg)
    assert np.abs(W.q_marginal() - psi.density()).max() < 1e-4


# --- comparison metrics --------------------------------------------------------------------


def test_compare_identical_and_global_phase(packet):
    g = Grid1D.centered(512, 0.1)
    psi = init_wavefunction(packet, g)
    m = compare_fields(psi, psi)
    assert m["L1"] == m["L2"] == m["Linf"] == 0.0
    assert m["fidelity"] == pytest.approx(1.0, abs=1e-12)
    rot = psi.with_amp(psi.amp * np.exp(0.7j))
    m = compare_fields(rot, psi)
    assert m["Linf"] < 1e-15 and m["fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_compare_box_functions():
    # boxes [0, 2) and [1, 3) of heights 1 and 2: |diff| is 1, 1, 2 on unit intervals
    g = Grid1D(300, 0.0, 0.01)
    x = g.points
    a = np.where(x < 2, 1.0, 0.0)
    b = np.where((x >= 1), 2.0, 0.0)
    m = compare_fields(PhaseSpaceField(PhaseSpaceGrid(g, Grid1D(3, 0.0, 1.0)), np.repeat(a[:, None], 3, 1)),
                       PhaseSpaceField(PhaseSpaceGrid(g, Grid1D(3, 0.0, 1.0)), np.repeat(b[:, None], 3, 1)))
    # per unit p: L1 = 1 + 1 + 2 = 4, L2^2 = 1 + 1 + 4 = 6; three p rows of width 1
    assert m["L1"] == pytest.approx(3 * 4.0, rel=1e-12)
    assert m["L2"] == pytest.approx(math.sqrt(3 * 6.0), rel=1e-12)
    assert m["Linf"] == 2.0


def test_compare_errors(packet):
    a = init_wavefunction(packet, Grid1D.centered(512, 0.1))
    b = init_wavefunction(packet, Grid1D.centered(256, 0.2))
    with pytest.raises(ValueError):
        compare_fields(a, b)
    with pytest.raises(TypeError):
        compare_fields(a, init_wigner(packet, PhaseSpaceGrid.centered(100, 0.225, 100, 0.12)))


def test_partial_norm_deviation_bounded_by_l1(barrier):
    g = Grid1D.centered(512, 0.16)
    a = chebyshev_run(barrier, g, 8.0)
    b = chebyshev_run(barrier, g, 8.4)
    l1 = compare_fields(a, b)["L1"]
    assert abs(partial_norms(a.density(), g)[0] - partial_norms(b.density(), g)[0]) <= l1 + 1e-12


# --- ellipse oracle ------------------------------------------------------------------------


@pytest.mark.parametrize("v0", ["0.5", "1.0", "2.0"])
def test_ellipse_matches_frozen(frozen, packet, v0):
    got = ellipse_transmission_oracle(packet, PotentialSpec.barrier(V0=float(v0)))
    assert got == pytest.approx(frozen["ellipse_N_plus"][v0], abs=1e-8)


def test_ellipse_limits(packet):
    assert ellipse_transmission_oracle(packet, PotentialSpec.barrier(V0=100.0)) < 1e-12
    assert ellipse_transmission_oracle(packet, PotentialSpec.barrier(V0=1e-8)) == pytest.approx(1.0, abs=1e-4)
