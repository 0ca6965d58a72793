"""Ray-based wideband THz channel and user direction trajectories.

Directions are stored as physical directions ``theta = sin(angle)`` in
[-1, 1]. At subcarrier m the array sees the spatial direction
``xi_m * theta`` (half-wavelength spacing at the carrier).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .syscfg import ConfigError, FrequencyGrid


class TrajectoryError(ValueError):
    """A generated direction left [-1, 1]."""


@dataclass(frozen=True)
class PathParams:
    """One propagation path: carrier gain, delay (s), physical direction."""

    g_c: float
    theta: float
    tau: float = 0.0
    is_los: bool = True

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ConfigError(f"path direction must lie in [-1, 1], got {self.theta}")
        if self.g_c < 0:
            raise ConfigError(f"path gain must be nonnegative, got {self.g_c}")
        if self.tau < 0:
            raise ConfigError(f"path delay must be nonnegative, got {self.tau}")


@dataclass(frozen=True)
class UserChannel:
    """Paths of one user and the synthesized ``M x N`` channel rows."""

    paths: tuple[PathParams, ...]
    h: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Trajectory:
    """Per-user direction tracks.

    ``theta`` has shape ``(frames + 1, K)``: row 0 is the initial direction,
    row i the direction at frame i.
    """

    theta0: np.ndarray
    deltas: np.ndarray
    alpha: np.ndarray

    @property
    def frames(self) -> int:
        return self.deltas.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return self.theta0[None, :] + np.vstack([np.zeros_like(self.theta0), np.cumsum(self.deltas, axis=0)])


def array_response(N: int, psi) -> np.ndarray:
    """Unit-norm ULA response ``exp(j*pi*n*psi) / sqrt(N)``.

    ``psi`` may be an array; the antenna axis is appended last.
    """
    psi = np.asarray(psi, dtype=float)
    n = np.arange(N)
    return np.exp(1j * np.pi * psi[..., None] * n) / np.sqrt(N)


def fspl_db(f_ghz: float, distance_m: float) -> float:
    """Free-space path loss in dB with frequency in GHz and distance in metres."""
    if f_ghz <= 0 or distance_m <= 0:
        raise ConfigError("frequency and distance must be positive")
    return 32.4 + 20 * np.log10(f_ghz) + 20 * np.log10(distance_m)


def los_gain_at_subcarrier(g_c, f_m, f_c):
    """LoS amplitude at ``f_m`` given its value ``g_c`` at the carrier."""
    return np.asarray(f_m) / f_c * g_c


def synthesize_channel(grid: FrequencyGrid, paths, N: int) -> UserChannel:
    """Build ``h[m] = sum_l beta_l,m * a_N(xi_m * theta_l)^H`` for every subcarrier.

    The LoS path (index 0) is scaled by ``xi_m``; NLoS gains are flat in
    frequency. The delay phase is ``exp(-j*pi*tau*f_m)``.
    """
    paths = tuple(paths)
    if not paths:
        raise ConfigError("at least one path is required")
    if not paths[0].is_los or any(p.is_los for p in paths[1:]):
        raise ConfigError("exactly one LoS path is required and it must come first")
    h = np.zeros((grid.M, N), dtype=complex)
    for p in paths:
        gain = los_gain_at_subcarrier(p.g_c, grid.f, grid.f_c) if p.is_los else np.full(grid.M, p.g_c)
        beta = gain * np.exp(-1j * np.pi * p.tau * grid.f)
        h += beta[:, None] * array_response(N, grid.xi * p.theta).conj()
    h.setflags(write=False)
    return UserChannel(paths=paths, h=h)


def los_channels(grid: FrequencyGrid, theta, N: int, g_c=1.0) -> np.ndarray:
    """Single-LoS channels for many users at once, shape ``(K, M, N)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    g_c = np.broadcast_to(np.asarray(g_c, dtype=float), theta.shape)
    gain = g_c[:, None] * grid.xi[None, :]
    return gain[..., None] * array_response(N, theta[:, None] * grid.xi[None, :]).conj()


def explicit_trajectory(theta0, deltas, alpha=None) -> Trajectory:
    """Trajectory from fixed per-frame increments, shape ``(frames, K)``."""
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    deltas = np.asarray(deltas, dtype=float).reshape(-1, theta0.size)
    if alpha is None:
        alpha = np.full(theta0.size, np.nan)
    traj = Trajectory(theta0=theta0, deltas=deltas, alpha=np.broadcast_to(np.asarray(alpha, float), theta0.shape).copy())
    _check_range(traj.theta)
    return traj


def random_trajectory(K: int, frames: int, alpha_max, rng: np.random.Generator, theta0=None) -> Trajectory:
    """Random-drift trajectory.

    Each user draws ``theta0 ~ U(-1, 1)`` (unless given) and a variation range
    ``alpha_k ~ U(0, alpha_max)`` once; every frame the next direction is
    uniform on ``[theta - alpha_k, theta + alpha_k]``.
    """
    if frames < 1:
        raise ConfigError("frames must be >= 1")
    alpha_max = np.broadcast_to(np.asarray(alpha_max, dtype=float), (K,))
    if theta0 is None:
        theta0 = rng.uniform(-1.0, 1.0, size=K)
    theta0 = np.asarray(theta0, dtype=float)
    alpha = rng.uniform(0.0, alpha_max)
    deltas = rng.uniform(-1.0, 1.0, size=(frames, K)) * alpha
    traj = Trajectory(theta0=theta0, deltas=deltas, alpha=alpha)
    _check_range(traj.theta)
    return traj


def fig9_trajectory(frames: int = 30) -> Trajectory:
    """The four-user track used for the frame-by-frame tracking demo."""
    theta0 = [-0.4, 0.16, -0.15, 0.35]
    i = np.arange(frames)
    deltas = np.column_stack([
        np.full(frames, 0.005),
        np.full(frames, -0.01),
        np.full(frames, 0.012),
        np.where(i < 15, -0.08, 0.08),
    ])
    return explicit_trajectory(theta0, deltas, alpha=0.1)


def _check_range(theta):
    bad = np.argwhere(np.abs(theta) > 1.0)
    if bad.size:
        frame, user = bad[0]
        raise TrajectoryError(f"user {user} leaves [-1, 1] at frame {frame}: {theta[frame, user]:.4f}")
