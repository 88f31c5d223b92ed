"""Propagators for 1-D quantum wave-packet dynamics and their cross-validation."""
from .core import (
    DEFAULT_UNITS,
    GaussianPacketSpec,
    Grid1D,
    PhaseSpaceField,
    PhaseSpaceGrid,
    PotentialSpec,
    SimulationUnits,
    WaveField,
    apply_hamiltonian,
    init_tomogram,
    init_wavefunction,
    init_wigner,
    spectral_bounds,
)
from .errors import (
    BoundaryLeakError,
    ConfigError,
    CourantError,
    DegenerateFrameError,
    NumericalInstabilityError,
    QdynError,
    SizeError,
)

__version__ = "0.1.0"
