"""Wideband beam tracking for THz massive MIMO with delay-phase precoding."""

from .syscfg import ConfigError, FrequencyGrid, SystemConfig, antennas_per_td, build_frequency_grid

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FrequencyGrid",
    "SystemConfig",
    "antennas_per_td",
    "build_frequency_grid",
]
