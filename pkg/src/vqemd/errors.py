"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and every NumericalError subclass
to exit code 3.
"""


class VqemdError(Exception):
    """Base class for package errors."""


class ConfigError(VqemdError):
    """Malformed configuration, missing files, bad CLI usage."""


class NumericalError(VqemdError):
    """Base class for runtime numerical failures."""


class GeometryError(NumericalError):
    """Degenerate or invalid molecular geometry."""


class SCFConvergenceError(NumericalError):
    """SCF did not converge; carries the energy trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class SymmetryViolationError(NumericalError):
    """Operator does not respect an assumed symmetry."""


class InconsistentOperatorError(NumericalError):
    """Mapping conventions flipped between displaced geometries."""


class ResourceLimitError(NumericalError):
    """System size exceeds a dense-simulation cap."""


class MitigationUnavailableError(NumericalError):
    """Readout assignment matrix is singular."""


class LanczosSingularError(NumericalError):
    """Lanczos denominator too close to zero (d too close to an eigenvalue)."""


class ThermostatInactiveError(NumericalError):
    """Langevin requested with zero force covariance (exact backend)."""


class InsufficientFramesError(NumericalError):
    """Trajectory too short for the requested statistics."""
