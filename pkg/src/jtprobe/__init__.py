"""Simulation and metrology toolkit for a periodically driven, dissipative Jahn-Teller probe."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ClosedFormUnavailableError,
    ConfigError,
    CriticalityError,
    InstabilityError,
    IntegrationFailure,
    InvalidCutoffError,
    JTProbeError,
    NumericalError,
    ShapeError,
    SupercriticalError,
)
from .operators import HilbertSpace, Operator, QuantumState  # noqa: F401
from .model import ModelParams  # noqa: F401
