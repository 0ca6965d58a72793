"""Feasibility, training-overhead and rate analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamform import FeasibilityError, _zoom_constant, dirichlet_sinc, dpp_margin
from .syscfg import ConfigError, FrequencyGrid, SystemConfig

T_SEARCH_LIMIT = 1024


@dataclass(frozen=True)
class OverheadBoundReport:
    """Smallest feasible number of training slots.

    ``binding_constraint`` is the 1-based ``(t, m, theta)`` with the least
    slack at ``T_min``; ``gamma_table`` is ``(T_min, M)``.
    """

    T_min: int
    binding_constraint: tuple
    gamma_table: np.ndarray = field(repr=False)
    orientation: str = "auto"

    def __str__(self):
        t, m, th = self.binding_constraint
        return f"T_min = {self.T_min} (binding t={t}, m={m}, theta={th:+g}, orientation={self.orientation})"


@dataclass(frozen=True)
class RateReport:
    """``sum_rate`` is the per-subcarrier average ``R/M``; ``total`` is ``R``."""

    sum_rate: float
    total: float
    per_user_per_subcarrier: np.ndarray = field(repr=False)
    sinr: np.ndarray = field(repr=False)
    lower_bound: np.ndarray | None = field(default=None, repr=False)


def dpp_feasible(cfg: SystemConfig, grid: FrequencyGrid) -> tuple[bool, float]:
    """Whether a split-free beam exists for every direction, and the margin."""
    margin = dpp_margin(cfg, grid)
    return margin > 0, margin


def gamma(t, m, cfg: SystemConfig, grid: FrequencyGrid):
    """``P (1 - xi_m) (2t - xi_1 + c)`` for 1-based ``t`` and ``m`` (broadcasting)."""
    c = _zoom_constant(grid)
    xi = grid.xi[np.asarray(m) - 1]
    return cfg.P * (1 - xi) * (2 * np.asarray(t) - grid.xi_first + c)


def slot_betas(theta, alpha, T: int, cfg: SystemConfig, grid: FrequencyGrid) -> np.ndarray:
    """Delay phase of every (slot, subcarrier) when zooming ``theta -/+ alpha`` in T slots.

    ``alpha`` is signed like the fan orientation. Shape ``(T, M)``.
    """
    t = np.arange(1, T + 1)[:, None]
    m = np.arange(1, grid.M + 1)[None, :]
    return -(cfg.P * (1 - grid.xi[None, :]) * (theta - alpha) + gamma(t, m, cfg, grid) * alpha / T)


def _worst_cases(alpha: float, orientation: str):
    """(theta, signed alpha) pairs that bound every direction.

    The constraint is affine in theta, so the ends of each orientation's
    theta interval suffice.
    """
    if orientation == "ascending":
        return [(-1.0, alpha), (1.0, alpha)]
    if orientation == "auto":
        return [(-1.0, alpha), (0.0, alpha), (0.0, -alpha), (1.0, -alpha)]
    raise ConfigError(f"unknown orientation {orientation!r}")


def t_min(cfg: SystemConfig, grid: FrequencyGrid, alpha: float, orientation: str = "auto",
          T_limit: int = T_SEARCH_LIMIT, theta: float | None = None) -> OverheadBoundReport:
    """Fewest slots for which every zoomed slot beam has ``|beta| <= 1``.

    Searches T = 1, 2, ... directly. ``orientation="auto"`` matches the
    tracker's default (fan mirrored for positive directions);
    ``"ascending"`` is the fixed low-to-high fan over all of ``[-1, 1]``.
    With ``theta`` given only that tracking center is checked instead of
    the worst case over all directions.

    Raises
    ------
    FeasibilityError
        If split-free beams are impossible for this band or no T up to
        ``T_limit`` works.
    """
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    ok, margin = dpp_feasible(cfg, grid)
    if not ok:
        raise FeasibilityError(f"delay-phase structure infeasible: margin {margin:.4f} <= 0 (reduce P or B)")
    cases = _worst_cases(alpha, orientation)
    if theta is not None:
        sign = -1.0 if (orientation == "auto" and theta > 0) else 1.0
        cases = [(float(theta), sign * alpha)]
    for T in range(1, T_limit + 1):
        worst, where = -np.inf, None
        for theta, a in cases:
            b = np.abs(slot_betas(theta, a, T, cfg, grid))
            i = np.unravel_index(np.argmax(b), b.shape)
            if b[i] > worst:
                worst, where = b[i], (int(i[0]) + 1, int(i[1]) + 1, theta)
        if worst <= 1 + 1e-12:
            t = np.arange(1, T + 1)[:, None]
            m = np.arange(1, grid.M + 1)[None, :]
            return OverheadBoundReport(T, where, gamma(t, m, cfg, grid), orientation)
    raise FeasibilityError(f"no T <= {T_limit} keeps |beta| <= 1 for alpha={alpha}")


def quantization_zeta(grid: FrequencyGrid) -> float:
    return grid.xi_last / (grid.xi_first + grid.B / (grid.f_c * grid.M))


def quantization_bound(alpha: float, T: int, grid: FrequencyGrid) -> float:
    """Closed-form quantization step ``zeta * alpha / (T M)``.

    This is the customary figure of merit; the exact worst case is
    ``max_half_gap``, larger by the factor ``M / (M - 1)``.
    """
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    return quantization_zeta(grid) * abs(alpha) / (T * grid.M)


def max_half_gap(alpha: float, T: int, grid: FrequencyGrid) -> float:
    """Exact worst distance from an in-range direction to its nearest zoom candidate.

    The widest gap sits between subcarriers 1 and 2.
    """
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if grid.B == 0:
        return abs(alpha) / (T * (grid.M - 1))
    return grid.xi_last / ((grid.M - 1) * grid.xi[1]) * abs(alpha) / T


def sum_rate(H, A, D, sigma2: float) -> RateReport:
    """Achievable rate with linear precoding.

    Parameters
    ----------
    H : ndarray, (M, K, N)
    A : ndarray, (M, N, K) or None
        Analog beams; ``None`` means fully digital (``D`` is then ``(M, N, K)``).
    D : ndarray, (M, K, K) or (M, N, K)
    """
    G = H @ D if A is None else H @ A @ D  # (M, K, K): user k, stream j
    power = np.abs(G) ** 2
    desired = np.einsum("mkk->mk", power)
    interference = power.sum(axis=-1) - desired
    sinr = desired / (interference + sigma2)
    rates = np.log2(1 + sinr).T  # (K, M)
    total = float(rates.sum())
    return RateReport(sum_rate=total / H.shape[0], total=total, per_user_per_subcarrier=rates, sinr=sinr.T)


def rate_lower_bound(cfg: SystemConfig, grid: FrequencyGrid, theta, alpha, T: int, rho: float,
                     sigma2: float, g_c=1.0) -> np.ndarray:
    """Closed-form per-user, per-subcarrier rate floor, shape ``(K, M)``.

    ``theta`` is the user's current (true) direction. Valid for a single LoS
    path, ZF and detection of the nearest candidate. The quantization step is
    the exact ``max_half_gap`` and the split term uses
    ``|(1 - xi_M) theta|``, so the floor holds for either sign of ``theta``.
    """
    theta = np.atleast_1d(np.asarray(theta, float))[:, None]
    K = theta.shape[0]
    alpha = np.broadcast_to(np.asarray(alpha, float), (K,))[:, None]
    g_c = np.broadcast_to(np.asarray(g_c, float), (K,))[:, None]
    q = np.array([[max_half_gap(a, T, grid)] for a in alpha[:, 0]])
    xi = grid.xi[None, :]
    eta = dirichlet_sinc(cfg.K_d, xi * cfg.P * q) ** 2 * \
        dirichlet_sinc(cfg.P, np.abs(1 - grid.xi_last) * np.abs(theta) + q) ** 2
    return np.log2(1 + rho / sigma2 * (xi * g_c) ** 2 * eta)
