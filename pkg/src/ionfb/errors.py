"""Exceptions and warning categories used across the package."""


class IonfbError(Exception):
    """Base class for all package errors."""


class BlueDetuningError(IonfbError):
    """Laser detuning is zero or blue; no cooling steady state exists."""


class HeatingDominatesError(IonfbError):
    """Heating rate A+ is at least the cooling rate A-."""


class NotNormalizedError(IonfbError):
    """Angular emission pattern does not integrate to one."""


class UnstableError(IonfbError):
    """Moment dynamics have an eigenvalue with non-negative real part."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DegenerateStateError(IonfbError):
    """Covariance matrix is degenerate (zero total variance)."""


class DimensionMismatchError(IonfbError):
    """Operators or states act on different truncated spaces."""


class TruncationLeakageError(IonfbError):
    """Population reached the top of the truncated Fock basis."""


class StepTooLargeError(IonfbError):
    """Time step violates the per-step probability or stability bound."""


class NormCollapseError(IonfbError):
    """Conditional state trace collapsed during stochastic integration."""


class GridMismatchError(IonfbError):
    """Trajectory records do not share a common time grid."""


class NoStableGainError(IonfbError):
    """No stable gain exists in the requested search range."""


class SampleRateTooLowError(IonfbError):
    """Signal sample rate cannot resolve the local-oscillator frequency."""


class ConfigError(IonfbError):
    """Malformed configuration file or command-line input."""


class ParameterRegimeWarning(UserWarning):
    """Parameters violate an assumption of the model (soft check)."""


class PhysicalityWarning(UserWarning):
    """A state fails a physicality monitor (uncertainty bound, leakage)."""
