"""Finite-clock models of relational time and modular variables."""

from .clock import ClockModel, make_clock
from .errors import ConfigError, DimensionError, LayoutError, ModclockError, NotHermitianError, PreconditionError
from .opalg import Operator, StateVector
from .settings import override, set_hbar

__version__ = "0.1.0"

__all__ = [
    "ClockModel",
    "ConfigError",
    "DimensionError",
    "LayoutError",
    "ModclockError",
    "NotHermitianError",
    "Operator",
    "PreconditionError",
    "StateVector",
    "make_clock",
    "override",
    "set_hbar",
]
