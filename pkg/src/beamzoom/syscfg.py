"""System parameters and the OFDM frequency grid.

Subcarrier indices are 1-based wherever they leave this package (CSV
columns, CLI output); arrays are stored 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration violates one of its constraints."""


@dataclass(frozen=True)
class SystemConfig:
    """Array, OFDM and power parameters.

    Attributes
    ----------
    N : int
        Number of BS antennas.
    M : int
        Number of subcarriers.
    K : int
        Number of users (and RF chains).
    K_d : int
        Time-delayers per RF chain. ``N`` must be a multiple of ``K_d``.
    f_c : float
        Carrier frequency in Hz.
    B : float
        Bandwidth in Hz. Zero is allowed (narrowband degeneracy).
    Q : int
        Pilot sequence length.
    rho : float
        Per-user transmit power (linear).
    sigma2 : float
        Noise power (linear). Zero gives noiseless simulations.
    seed : int
        Base PRNG seed.
    """

    N: int = 256
    M: int = 128
    K: int = 4
    K_d: int = 16
    f_c: float = 100e9
    B: float = 10e9
    Q: int = 10
    rho: float = 1.0
    sigma2: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError(f"N must be >= 2, got {self.N}")
        if self.M < 2:
            raise ConfigError(f"M must be >= 2, got {self.M}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.K_d < 1:
            raise ConfigError(f"K_d must be >= 1, got {self.K_d}")
        if self.N % self.K_d:
            raise ConfigError(f"N mod K_d must be 0, got N={self.N}, K_d={self.K_d}")
        if self.Q < 1:
            raise ConfigError(f"Q must be >= 1, got {self.Q}")
        for name in ("f_c", "rho"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if not self.sigma2 >= 0:
            raise ConfigError(f"sigma2 must be nonnegative, got {self.sigma2}")
        if self.B < 0:
            raise ConfigError(f"B must be nonnegative, got {self.B}")
        if not self.B < 2 * self.f_c:
            raise ConfigError(f"B must be < 2*f_c so every relative frequency is positive, got B={self.B}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def P(self) -> int:
        """Antennas per time-delayer."""
        return self.N // self.K_d

    @property
    def snr_db(self) -> float:
        if self.sigma2 == 0:
            return float("inf")
        return 10 * np.log10(self.rho / self.sigma2)

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        """Copy with ``sigma2`` set so that ``rho / sigma2`` equals the given SNR."""
        return self.replace(sigma2=self.rho / 10 ** (snr_db / 10))

    def replace(self, **changes) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class FrequencyGrid:
    """Subcarrier frequencies ``f`` (Hz), relative frequencies ``xi`` and carrier period ``T_c``."""

    f: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    T_c: float
    f_c: float
    B: float

    @property
    def M(self) -> int:
        return self.f.size

    @property
    def xi_first(self) -> float:
        return float(self.xi[0])

    @property
    def xi_last(self) -> float:
        return float(self.xi[-1])


def build_frequency_grid(cfg: SystemConfig) -> FrequencyGrid:
    """Symmetric OFDM grid ``f_m = f_c + (B/M)(m - 1 - (M-1)/2)`` for m = 1..M."""
    m = np.arange(1, cfg.M + 1)
    offsets = (cfg.B / cfg.M) * (m - 1 - (cfg.M - 1) / 2)
    f = cfg.f_c + offsets
    # offsets / f_c keeps xi_1 + xi_M == 2 to rounding, which f / f_c does not
    xi = 1.0 + offsets / cfg.f_c
    f.setflags(write=False)
    xi.setflags(write=False)
    return FrequencyGrid(f=f, xi=xi, T_c=1.0 / cfg.f_c, f_c=cfg.f_c, B=cfg.B)


def antennas_per_td(cfg: SystemConfig) -> int:
    if cfg.N % cfg.K_d:
        raise ConfigError(f"N mod K_d must be 0, got N={cfg.N}, K_d={cfg.K_d}")
    return cfg.N // cfg.K_d
