"""Delay-phase analog beamformers, array gains and digital precoders.

Every analog beamformer here has the linear-delay form: ``K_d`` blocks of
``P`` phase shifters, block ``j`` fed by a time delay ``s * T_c * j``. The
phase shifters steer towards ``phi`` and each block carries an extra
constant phase ``pi * (P*phi + 2*s) * j``. At relative frequency ``xi`` the
delay network then contributes a per-block phase slope
``beta = 2 * (1 - xi) * s``, which moves the beam to
``phi/xi + beta/(xi*P)`` as long as ``|beta| <= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import array_response
from .syscfg import ConfigError, FrequencyGrid, SystemConfig


class FeasibilityError(ValueError):
    """The delay network cannot realize the requested beams."""


class ZoomInfeasibleError(FeasibilityError):
    """Some subcarrier needs a delay phase outside [-1, 1].

    ``m`` is the 1-based subcarrier index of the worst offender.
    """

    def __init__(self, m: int, beta: float, message: str | None = None):
        self.m = m
        self.beta = beta
        super().__init__(message or f"zoom infeasible: |beta| = {abs(beta):.4f} > 1 at subcarrier m={m}")


class PrecodingError(ValueError):
    pass


ZF_MAX_CONDITION = 1e8


@dataclass(frozen=True)
class AnalogBeamformer:
    """One RF chain's phase-shifter blocks and time delays.

    Attributes
    ----------
    ps_blocks : ndarray, shape (K_d, P)
        Phase-shifter weights; every entry has modulus ``1/sqrt(N)``.
    delays : ndarray, shape (K_d,)
        Time delays in seconds, ``s * T_c * [0, 1, ..., K_d - 1]``.
    phi : float
        Phase-shifter pointing direction.
    s : float
        Delay slope in carrier periods (may be negative).
    """

    ps_blocks: np.ndarray = field(repr=False)
    delays: np.ndarray = field(repr=False)
    phi: float
    s: float

    @property
    def N(self) -> int:
        return self.ps_blocks.size

    @property
    def K_d(self) -> int:
        return self.ps_blocks.shape[0]

    @property
    def P(self) -> int:
        return self.ps_blocks.shape[1]

    def beta(self, xi) -> np.ndarray:
        """Per-block delay phase slope at relative frequency ``xi``."""
        return 2.0 * (1.0 - np.asarray(xi)) * self.s


def linear_delay_beamformer(phi: float, s: float, cfg: SystemConfig) -> AnalogBeamformer:
    P, K_d = cfg.P, cfg.K_d
    j = np.arange(K_d)
    block = np.exp(1j * np.pi * np.arange(P) * phi) / np.sqrt(cfg.N)
    ps = block[None, :] * np.exp(1j * np.pi * (P * phi + 2 * s) * j)[:, None]
    delays = s / cfg.f_c * j
    ps.setflags(write=False)
    delays.setflags(write=False)
    return AnalogBeamformer(ps_blocks=ps, delays=delays, phi=float(phi), s=float(s))


def materialize(bf: AnalogBeamformer, f_m) -> np.ndarray:
    """Beamforming vector(s) at frequency ``f_m`` (Hz).

    Returns shape ``(N,)`` for scalar ``f_m`` and ``(len(f_m), N)`` otherwise.
    """
    f_m = np.asarray(f_m, dtype=float)
    td = np.exp(-2j * np.pi * f_m[..., None] * bf.delays)  # (..., K_d)
    return (td[..., :, None] * bf.ps_blocks).reshape(*f_m.shape, bf.N)


def materialize_all(bfs, grid: FrequencyGrid) -> np.ndarray:
    """Stack beams of several RF chains over the grid, shape ``(M, N, K)``."""
    return np.stack([materialize(bf, grid.f) for bf in bfs], axis=-1)


def dirichlet_sinc(Nbar: int, x):
    """``sin(Nbar*pi*x/2) / (Nbar*sin(pi*x/2))`` with its limits at even integers."""
    x = np.asarray(x, dtype=float)
    half = np.pi * x / 2
    den = Nbar * np.sin(half)
    k = np.rint(x / 2)
    singular = np.abs(x - 2 * k) < 1e-12
    limit = np.where(np.mod(k * (Nbar - 1), 2) == 0, 1.0, -1.0)
    safe = np.where(singular, 1.0, den)
    out = np.where(singular, limit, np.sin(Nbar * half) / safe)
    return out if out.ndim else float(out)


def array_gain(f: np.ndarray, theta, xi):
    """``|a_N(xi*theta)^H f|`` for one beam vector ``f``.

    ``theta`` and ``xi`` broadcast against each other.
    """
    psi = np.asarray(theta, dtype=float) * np.asarray(xi, dtype=float)
    a = array_response(f.shape[-1], psi)
    out = np.abs(a.conj() @ f)
    return out if np.ndim(out) else float(out)


def pattern_gain(phi: float, beta, theta, xi, K_d: int, P: int):
    """Closed-form gain of a linear-delay beam, normalized to unit peak."""
    u = phi - np.asarray(xi) * np.asarray(theta)
    return np.abs(dirichlet_sinc(K_d, P * u + beta) * dirichlet_sinc(P, u))


def split_direction(theta, xi):
    """Where a frequency-flat beam for ``theta`` actually points at ``xi``."""
    return np.asarray(theta) / np.asarray(xi)


def steered_direction(phi, beta, xi, P: int):
    """Main-lobe direction of a beam with PS pointing ``phi`` and delay phase ``beta``."""
    return np.asarray(phi) / np.asarray(xi) + np.asarray(beta) / (np.asarray(xi) * P)


def dpp_margin(cfg: SystemConfig, grid: FrequencyGrid) -> float:
    """``1 - max_m |P (xi_m - 1)|``; positive when split-free beams exist for every direction."""
    return 1.0 - float(np.max(np.abs(cfg.P * (grid.xi - 1.0))))


def split_free_beamformer(theta: float, cfg: SystemConfig, grid: FrequencyGrid | None = None) -> AnalogBeamformer:
    """Beam aligned with ``theta`` across the band: ``phi = theta``, ``s = -P*theta/2``."""
    if grid is not None and dpp_margin(cfg, grid) <= 0:
        raise FeasibilityError(
            f"P = {cfg.P} antennas per delayer is too many for this band: "
            f"max |P (xi_m - 1)| = {1 - dpp_margin(cfg, grid):.4f} >= 1"
        )
    return linear_delay_beamformer(theta, -cfg.P * theta / 2, cfg)


def frequency_flat_beamformer(theta: float, cfg: SystemConfig) -> AnalogBeamformer:
    """Phase-shifter-only beam ``a_N(theta)`` (all delays zero)."""
    bf = linear_delay_beamformer(theta, 0.0, cfg)
    return bf


def _zoom_constant(grid: FrequencyGrid) -> float:
    x1, xM = grid.xi_first, grid.xi_last
    if xM - x1 <= 0:
        raise ConfigError("beam zooming needs a nonzero bandwidth (xi_M - xi_1 = 0)")
    return 2 * xM * x1 / (xM - x1)


def zoom_parameters(theta: float, alpha: float, cfg: SystemConfig, grid: FrequencyGrid) -> tuple[float, float]:
    """PS pointing and delay slope that fan the M beams over ``theta -/+ alpha``.

    ``alpha`` is signed: positive puts subcarrier 1 at ``theta - alpha`` and
    subcarrier M at ``theta + alpha``; negative reverses the fan.
    """
    c = _zoom_constant(grid)
    phi = theta + (1 - grid.xi_first) * alpha
    s = -cfg.P / 2 * (phi + c * alpha)
    return phi, s


def zoom_directions(theta: float, alpha: float, grid: FrequencyGrid) -> np.ndarray:
    c = _zoom_constant(grid)
    xi = grid.xi
    return theta + (1 - grid.xi_first) * alpha + c * (xi - 1) / xi * alpha


def check_beta(beta, tol: float = 1e-12):
    beta = np.asarray(beta)
    worst = int(np.argmax(np.abs(beta)))
    if abs(beta[worst]) > 1 + tol:
        raise ZoomInfeasibleError(worst + 1, float(beta[worst]))


def zoom_beamformer(theta: float, alpha: float, cfg: SystemConfig, grid: FrequencyGrid) -> AnalogBeamformer:
    """Beamformer whose subcarrier beams cover ``[theta - |alpha|, theta + |alpha|]``.

    Raises
    ------
    ZoomInfeasibleError
        If some subcarrier would need ``|beta| > 1``.
    """
    phi, s = zoom_parameters(theta, alpha, cfg, grid)
    bf = linear_delay_beamformer(phi, s, cfg)
    check_beta(bf.beta(grid.xi))
    return bf


def fan_sign(theta: float) -> float:
    """Fan orientation that follows the natural beam split at ``theta``.

    A frequency-flat beam at ``theta > 0`` points further out at low
    subcarriers, so a descending fan needs the least delay; the mirror
    holds for ``theta <= 0``.
    """
    return -1.0 if theta > 0 else 1.0


def delay_table(bf: AnalogBeamformer, version: int = 1) -> str:
    """Inspection table: one row per delayer with PS phases (turns) and delay (ps).

    Delays are shifted by a common constant so the smallest is zero; this is a
    per-subcarrier global phase and leaves every gain unchanged.
    """
    delays_ps = (bf.delays - bf.delays.min()) * 1e12
    lines = [
        f"# beamzoom-delay-table v{version} phi={bf.phi:.9g} s={bf.s:.9g} K_d={bf.K_d} P={bf.P}",
        "# block\t" + "\t".join(f"ps{p}" for p in range(bf.P)) + "\tdelay_ps",
    ]
    turns = np.mod(np.round(np.angle(bf.ps_blocks) / (2 * np.pi), 9), 1.0)
    for j in range(bf.K_d):
        lines.append("\t".join([str(j + 1), *(f"{t:.6f}" for t in turns[j]), f"{delays_ps[j]:.6f}"]))
    return "\n".join(lines) + "\n"


def _normalize_columns(D, rho, A=None):
    eff = D if A is None else A @ D
    norms = np.linalg.norm(eff, axis=-2, keepdims=True)
    if np.any(norms == 0):
        raise PrecodingError("precoder column with zero norm")
    return D * (np.sqrt(rho) / norms)


def zf_precoder(H_eq: np.ndarray, rho: float, A: np.ndarray | None = None) -> np.ndarray:
    """Zero-forcing ``H^H (H H^H)^-1`` with columns scaled to power ``rho``.

    Without ``A`` the analog beams are treated as orthonormal, so the
    normalization is on ``D`` itself; with ``A`` it is on ``A @ D``.
    Works on stacks of matrices along leading axes.
    """
    H_eq = np.asarray(H_eq)
    cond = np.linalg.cond(H_eq)
    if np.any(~np.isfinite(cond)) or np.any(cond > ZF_MAX_CONDITION):
        raise PrecodingError(f"equivalent channel too ill-conditioned for ZF (cond = {np.max(cond):.3g})")
    Hh = np.conj(np.swapaxes(H_eq, -1, -2))
    D = Hh @ np.linalg.inv(H_eq @ Hh)
    return _normalize_columns(D, rho, A)


def mmse_precoder(H_eq: np.ndarray, rho: float, sigma2: float, A: np.ndarray | None = None) -> np.ndarray:
    """Regularized inverse ``(H^H H + (sigma2/rho) R)^-1 H^H``, columns scaled to ``rho``.

    ``R = A^H A`` when analog beams are given (the exact MMSE filter in the
    beam space) and ``I`` otherwise. With ``R = I`` this is the familiar
    ``H^H (H H^H + (K sigma2 / P_tot) I)^-1`` for total power ``P_tot = K rho``.
    """
    H_eq = np.asarray(H_eq)
    K = H_eq.shape[-2]
    Hh = np.conj(np.swapaxes(H_eq, -1, -2))
    reg = sigma2 / rho
    if A is None:
        D = Hh @ np.linalg.inv(H_eq @ Hh + reg * np.eye(K))
    else:
        R = np.conj(np.swapaxes(A, -1, -2)) @ A
        D = np.linalg.inv(Hh @ H_eq + reg * R) @ Hh
    return _normalize_columns(D, rho, A)
