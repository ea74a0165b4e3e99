"""Concrete settings: two-packet modular momentum, the pushed piston and the pulsed spin."""

from .doubleslit import (
    DoubleSlitConfig,
    collapse_uncertainty_demo,
    modular_momentum,
    polynomial_phase_insensitivity,
    two_packet_state,
)
from .grid import GridSystem
from .piston import PistonConfig, run_piston
from .spin import Regime, SpinPulseConfig, regime_config, run_spin, spin_modular_energy_rates

__all__ = [
    "DoubleSlitConfig",
    "GridSystem",
    "PistonConfig",
    "Regime",
    "SpinPulseConfig",
    "collapse_uncertainty_demo",
    "modular_momentum",
    "polynomial_phase_insensitivity",
    "regime_config",
    "run_piston",
    "run_spin",
    "spin_modular_energy_rates",
    "two_packet_state",
]
