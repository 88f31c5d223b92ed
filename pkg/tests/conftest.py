import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from qdyn.core import GaussianPacketSpec, Grid1D, PotentialSpec, init_wavefunction
from qdyn.reference import chebyshev_step, plan_chebyshev

settings.register_profile("qdyn", deadline=None, max_examples=40)
settings.load_profile("qdyn")

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture
def packet():
    return GaussianPacketSpec()


@pytest.fixture
def barrier():
    return PotentialSpec.barrier()


def chebyshev_run(spec, grid, t, dt=0.4, packet=None, field=None):
    """Propagate the default packet (or ``field``) to time ``t`` with Chebyshev steps of ``dt``."""
    psi = field if field is not None else init_wavefunction(packet or GaussianPacketSpec(), grid)
    n = int(round(t / dt))
    if n == 0:
        return psi
    plan = plan_chebyshev(spec, grid, t / n)
    for _ in range(n):
        psi = chebyshev_step(psi, plan, spec, on_leak="ignore")
    return psi


def refined_density(spec, coarse: Grid1D, t, refine=8, dt=0.4):
    """Near-continuum reference density on ``coarse`` nodes from a grid ``refine`` times finer."""
    fine = Grid1D(coarse.n * refine - (refine - 1), coarse.q_min, coarse.dq / refine)
    psi = chebyshev_run(spec, fine, t, dt)
    return psi.density()[::refine]


def free_packet_amplitude(q, t, packet, mass=1.0, hbar=1.0):
    """Closed-form free evolution of the Gaussian packet."""
    s0 = packet.sigma
    st = s0 * (1 + 1j * hbar * t / (2 * mass * s0**2))
    qc = packet.q0 + packet.p0 * t / mass
    pref = (2 * math.pi * s0**2) ** -0.25 * np.sqrt(s0 / st)
    return pref * np.exp(-((q - qc) ** 2) / (4 * s0 * st) + 1j * (packet.p0 * q - packet.p0**2 * t / (2 * mass)) / hbar)
