"""Exception hierarchy used across the package."""


class JTProbeError(Exception):
    """Base class for all errors raised by :mod:`jtprobe`."""


class InvalidCutoffError(JTProbeError, ValueError):
    """A Fock cutoff smaller than two levels was requested."""


class ShapeError(JTProbeError, ValueError):
    """Operator or state dimensions do not match the Hilbert space."""


class ClosedFormUnavailableError(JTProbeError, ValueError):
    """A closed-form expression was requested outside its domain (e.g. unequal mode frequencies)."""


class SupercriticalError(JTProbeError, ValueError):
    """The coherent coupling is at or beyond the critical value, so the soft mode is not oscillatory."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class CriticalityError(JTProbeError, ValueError):
    """The dissipative steady state does not exist (coupling at or above the dissipative critical point)."""

    def __init__(self, message, lam=None, lambda_c=None):
        super().__init__(message)
        self.lam = lam
        self.lambda_c = lambda_c


class IntegrationFailure(JTProbeError, RuntimeError):
    """Time integration produced NaNs or drifted beyond the hard trace limit."""


class NumericalError(JTProbeError, ArithmeticError):
    """A numerical step was ill-conditioned (singular matrix, vanishing finite-difference step)."""


class InstabilityError(JTProbeError, RuntimeError):
    """Moment equations diverged; carries the couplings so callers can report the critical point."""

    def __init__(self, message, lam=None, lambda_c=None, tau=None):
        super().__init__(message)
        self.lam = lam
        self.lambda_c = lambda_c
        self.tau = tau


class ConfigError(JTProbeError, ValueError):
    """Invalid experiment configuration."""
