"""Exception and warning types shared across the package."""


class QdynError(Exception):
    """Base class for all package errors."""


class ConfigError(QdynError, ValueError):
    """Invalid run configuration or invalid estimator parameters."""


class GridError(QdynError, ValueError):
    """Grid too small or too narrow for the requested state."""


class BoundaryLeakError(GridError):
    """Wave function amplitude reached the edge of the simulation box."""


class DegenerateFrameError(QdynError, ValueError):
    """Tomographic frame (mu, nu) = (0, 0)."""


class CourantError(QdynError, ValueError):
    """Time step exceeds the Courant bound of the linearized propagator."""


class SizeError(QdynError, ValueError):
    """Problem size above a configured cap (e.g. dense diagonalization)."""


class NumericalInstabilityError(QdynError, ArithmeticError):
    """A propagation diverged or produced non-finite values."""


class OutOfRangeError(QdynError, ValueError):
    """Argument outside the tabulated domain."""


class SnapshotMismatchError(QdynError, ValueError):
    """Two runs being compared do not share time stamps."""


class BoundaryLeakWarning(UserWarning):
    """Amplitude at the grid edge exceeded the monitoring threshold."""


class ClippingWarning(UserWarning):
    """A requested range was clipped to what the grid can represent."""


class CourantWarning(UserWarning):
    """A linearized-propagator step above the Courant bound was explicitly allowed."""
