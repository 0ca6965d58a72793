"""Beam tracking: zoomed-fan tracking, the exhaustive baseline and the two-stage variant.

Shapes used throughout:

* channels ``H``: ``(K, M, N)`` rows ``h_{k,m}``, constant over a frame's
  training slots, or ``(T, K, M, N)`` when they change per slot;
* analog beams ``A``: ``(M, N, K)``;
* received pilots ``Y``: ``(M, K, Q)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamform import (
    fan_sign,
    materialize,
    split_free_beamformer,
    zoom_beamformer,
    zoom_directions,
)
from .channel import array_response
from .syscfg import ConfigError, FrequencyGrid, SystemConfig


@dataclass(frozen=True)
class TargetDirectionSet:
    """Directions probed by each (slot, subcarrier) pair of one user.

    ``alpha`` is signed: negative means the fan is descending in m, so the
    first slot covers the top of the range.
    """

    psi: np.ndarray
    centers: np.ndarray
    theta: float
    alpha: float

    @property
    def T(self) -> int:
        return self.psi.shape[0]

    def flat(self) -> np.ndarray:
        return self.psi.reshape(-1)

    def max_gap(self) -> float:
        return float(np.max(np.abs(np.diff(np.sort(self.flat())))))


@dataclass(frozen=True)
class PilotBlock:
    pilots: np.ndarray

    @property
    def K(self) -> int:
        return self.pilots.shape[0]

    @property
    def Q(self) -> int:
        return self.pilots.shape[1]


@dataclass
class TrackingOutcome:
    """Result of one tracking run for K users.

    ``winners`` holds 0-based ``(t, m)`` pairs; ``power_table`` is
    ``(K, T, M)`` for the zoom tracker and ``(K, T, 1)`` for the baseline.
    """

    theta_hat: np.ndarray
    winners: np.ndarray
    power_table: np.ndarray = field(repr=False)
    candidates: np.ndarray = field(repr=False)
    overhead_used: int
    out_of_range_risk: np.ndarray


def target_directions(theta_i: float, alpha: float, T: int, grid: FrequencyGrid) -> TargetDirectionSet:
    """Split ``[theta_i - alpha, theta_i + alpha]`` into T sub-ranges, each fanned over M subcarriers."""
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    t = np.arange(1, T + 1)
    centers = theta_i - alpha + (2 * t - 1) * alpha / T
    psi = np.stack([zoom_directions(c, alpha / T, grid) for c in centers])
    return TargetDirectionSet(psi=psi, centers=centers, theta=float(theta_i), alpha=float(alpha))


def slot_beamformers(t: int, theta_i: float, alpha: float, T: int, cfg: SystemConfig, grid: FrequencyGrid):
    """Zoom beamformer for 1-based slot ``t`` (raises ZoomInfeasibleError when T is too small)."""
    center = theta_i - alpha + (2 * t - 1) * alpha / T
    return zoom_beamformer(center, alpha / T, cfg, grid)


def make_pilots(K: int, Q: int) -> PilotBlock:
    """K orthogonal rows of a Q-point DFT, each with energy Q."""
    if Q < K:
        raise ConfigError(f"need Q >= K for orthogonal pilots, got Q={Q}, K={K}")
    k = np.arange(K)[:, None]
    q = np.arange(Q)[None, :]
    return PilotBlock(pilots=np.exp(-2j * np.pi * k * q / Q))


def simulate_slot(H, A, pilots: PilotBlock, kappa, sigma2: float, rng: np.random.Generator, rho: float = 1.0):
    """Received pilots ``kappa * sqrt(rho) * H @ A @ pilots + noise``.

    ``H`` is ``(..., K, N)``, ``A`` is ``(..., N, K)`` and ``kappa`` broadcasts
    over the leading axes. Noise is circular complex Gaussian with variance
    ``sigma2`` per entry; ``sigma2 = 0`` draws nothing from ``rng``.
    """
    kappa = np.asarray(kappa, dtype=float)[..., None, None]
    Y = kappa * np.sqrt(rho) * (H @ A @ pilots.pilots)
    if sigma2 > 0:
        noise = rng.standard_normal(Y.shape + (2,)) @ np.array([1.0, 1j])
        Y = Y + np.sqrt(sigma2 / 2) * noise
    return Y


def correlate(Y, pilots: PilotBlock):
    """``|Y[..., k, :] @ q_k|^2`` for every user, shape ``(..., K)``."""
    return np.abs(np.einsum("...kq,kq->...k", Y, pilots.pilots.conj())) ** 2


def detect_winner(power_table) -> np.ndarray:
    """Per-user argmax over (t, m); ties go to the smallest (t, m)."""
    power_table = np.asarray(power_table)
    K, T, M = power_table.shape
    flat = np.argmax(power_table.reshape(K, T * M), axis=1)
    return np.column_stack(np.unravel_index(flat, (T, M)))


def _slot_channels(H, T):
    H = np.asarray(H)
    if H.ndim == 3:
        return [H] * T
    if H.shape[0] != T:
        raise ConfigError(f"per-slot channels must have T={T} leading entries, got {H.shape[0]}")
    return list(H)


def _per_user(x, K):
    return np.broadcast_to(np.asarray(x, dtype=float), (K,))


def track_beam_zoom(cfg: SystemConfig, grid: FrequencyGrid, H, theta_i, alpha, T: int,
                    rng: np.random.Generator, orientation: str = "auto", pilots: PilotBlock | None = None,
                    sigma2: float | None = None) -> TrackingOutcome:
    """Track K users at once with zoomed beam fans.

    In every slot each user's RF chain fans its M subcarrier beams over one
    T-th of the user's tracking range; the user reports the (slot,
    subcarrier) with the strongest pilot correlation.

    Parameters
    ----------
    H : ndarray
        ``(K, M, N)`` or ``(T, K, M, N)`` downlink channels.
    theta_i, alpha : array_like
        Previous directions and (nonnegative) variation ranges, one per user.
    orientation : {"auto", "ascending"}
        ``"ascending"`` always fans from low to high direction with
        increasing subcarrier; ``"auto"`` mirrors the fan for ``theta_i > 0``
        so it follows the natural beam split, which needs less delay.
    """
    K = cfg.K
    theta_i = _per_user(theta_i, K)
    alpha = _per_user(alpha, K)
    if orientation not in ("auto", "ascending"):
        raise ConfigError(f"unknown orientation {orientation!r}")
    sigma2 = cfg.sigma2 if sigma2 is None else sigma2
    pilots = pilots or make_pilots(K, cfg.Q)
    signed = np.array([a * (fan_sign(th) if orientation == "auto" else 1.0) for th, a in zip(theta_i, alpha)])

    targets = [target_directions(th, a, T, grid) for th, a in zip(theta_i, signed)]
    kappa = 1.0 / grid.xi
    power = np.empty((K, T, grid.M))
    for t, H_t in enumerate(_slot_channels(H, T), start=1):
        A = np.stack([materialize(slot_beamformers(t, th, a, T, cfg, grid), grid.f)
                      for th, a in zip(theta_i, signed)], axis=-1)
        Y = simulate_slot(np.swapaxes(H_t, 0, 1), A, pilots, kappa, sigma2, rng, cfg.rho)
        power[:, t - 1, :] = correlate(Y, pilots).T

    winners = detect_winner(power)
    cand = np.stack([tg.psi for tg in targets])
    theta_hat = cand[np.arange(K), winners[:, 0], winners[:, 1]]
    edge = ((winners[:, 0] == 0) & (winners[:, 1] == 0)) | ((winners[:, 0] == T - 1) & (winners[:, 1] == grid.M - 1))
    return TrackingOutcome(theta_hat=theta_hat, winners=winners, power_table=power, candidates=cand,
                           overhead_used=T, out_of_range_risk=edge)


def typical_directions(theta_i: float, alpha: float, T: int) -> np.ndarray:
    t = np.arange(1, T + 1)
    return theta_i - alpha + (2 * t - 1) * alpha / T


def track_typical(cfg: SystemConfig, grid: FrequencyGrid, H, theta_i, alpha, T: int,
                  rng: np.random.Generator, pilots: PilotBlock | None = None,
                  sigma2: float | None = None) -> TrackingOutcome:
    """Exhaustive baseline: one split-free beam per user per slot.

    Every subcarrier probes the same direction, so the per-slot statistic is
    the pilot correlation power summed over subcarriers.
    """
    K = cfg.K
    theta_i = _per_user(theta_i, K)
    alpha = _per_user(alpha, K)
    sigma2 = cfg.sigma2 if sigma2 is None else sigma2
    pilots = pilots or make_pilots(K, cfg.Q)
    probes = np.stack([typical_directions(th, a, T) for th, a in zip(theta_i, alpha)])  # (K, T)
    kappa = 1.0 / grid.xi
    power = np.empty((K, T, 1))
    for t, H_t in enumerate(_slot_channels(H, T)):
        A = np.stack([materialize(split_free_beamformer(probes[k, t], cfg), grid.f) for k in range(K)], axis=-1)
        Y = simulate_slot(np.swapaxes(H_t, 0, 1), A, pilots, kappa, sigma2, rng, cfg.rho)
        power[:, t, 0] = correlate(Y, pilots).sum(axis=0)
    winners = detect_winner(power)
    theta_hat = probes[np.arange(K), winners[:, 0]]
    edge = (winners[:, 0] == 0) | (winners[:, 0] == T - 1)
    return TrackingOutcome(theta_hat=theta_hat, winners=winners, power_table=power, candidates=probes[..., None],
                           overhead_used=T, out_of_range_risk=edge)


@dataclass(frozen=True)
class UserArray:
    """Receive array of a multi-antenna user (same band as the BS)."""

    N_r: int = 32
    K_d_r: int = 4

    def as_config(self, cfg: SystemConfig) -> SystemConfig:
        if self.N_r % self.K_d_r:
            raise ConfigError(f"N_r mod K_d_r must be 0, got N_r={self.N_r}, K_d_r={self.K_d_r}")
        return cfg.replace(N=self.N_r, K_d=self.K_d_r)


def two_stage_channels(grid: FrequencyGrid, theta_bs, theta_ue, N: int, N_r: int, g_c=1.0):
    """LoS factors of ``H_k,m = beta * a_Nr(xi*theta_ue) a_N(xi*theta_bs)^H``.

    Returns ``(bs_rows, ue_cols)`` with shapes ``(K, M, N)`` and ``(K, M, N_r)``;
    ``bs_rows`` already carries the path gain.
    """
    theta_bs = np.atleast_1d(np.asarray(theta_bs, float))
    theta_ue = np.atleast_1d(np.asarray(theta_ue, float))
    gain = np.broadcast_to(np.asarray(g_c, float), theta_bs.shape)[:, None] * grid.xi[None, :]
    bs_rows = gain[..., None] * array_response(N, theta_bs[:, None] * grid.xi).conj()
    ue_cols = array_response(N_r, theta_ue[:, None] * grid.xi)
    return bs_rows, ue_cols


def track_two_stage(cfg: SystemConfig, user: UserArray, grid: FrequencyGrid, theta_bs, theta_ue,
                    theta_i, theta_i_r, alpha, alpha_r, T: int, T_r: int, rng: np.random.Generator,
                    orientation: str = "auto", g_c=1.0, tracker: str = "zoom"):
    """Track BS-side then user-side directions of multi-antenna users.

    Stage 1 runs the BS-side tracker while every user combines
    omnidirectionally, modelled as a direction-independent gain
    ``1/sqrt(N_r)``. Stage 2 keeps a split-free BS beam on the stage-1
    estimate and runs the same kind of tracker on each user's own
    delay-phase array (combining with ``w^H``).

    ``tracker`` is ``"zoom"`` or ``"typical"``.

    Returns
    -------
    (theta_hat_bs, theta_hat_ue, stage1, stage2) : tuple
        Estimates and the two TrackingOutcome objects.
    """
    if tracker not in ("zoom", "typical"):
        raise ConfigError(f"unknown tracker {tracker!r}")
    K = cfg.K
    ucfg = user.as_config(cfg)
    bs_rows, ue_cols = two_stage_channels(grid, theta_bs, theta_ue, cfg.N, user.N_r, g_c)

    omni = bs_rows / np.sqrt(user.N_r)
    if tracker == "zoom":
        stage1 = track_beam_zoom(cfg, grid, omni, theta_i, alpha, T, rng, orientation=orientation)
    else:
        stage1 = track_typical(cfg, grid, omni, theta_i, alpha, T, rng)

    # Stage 2: the BS serves user k with a split-free beam at its estimate; the
    # pilot seen by user k after its own combiner w is (w^H a_r) * (h_k f_j).
    pilots = make_pilots(K, cfg.Q)
    F_bs = np.stack([materialize(split_free_beamformer(th, cfg), grid.f) for th in stage1.theta_hat], axis=-1)
    bs_eq = np.einsum("kmn,mnj->kmj", bs_rows, F_bs)  # (K, M, K)
    theta_i_r = _per_user(theta_i_r, K)
    alpha_r = _per_user(alpha_r, K)
    if tracker == "zoom":
        signed = np.array([a * (fan_sign(th) if orientation == "auto" else 1.0) for th, a in zip(theta_i_r, alpha_r)])
        cand = np.stack([target_directions(th, a, T_r, grid).psi for th, a in zip(theta_i_r, signed)])

        def combiners(t):
            return [slot_beamformers(t, th, a, T_r, ucfg, grid) for th, a in zip(theta_i_r, signed)]
    else:
        probes = np.stack([typical_directions(th, a, T_r) for th, a in zip(theta_i_r, alpha_r)])
        cand = probes[..., None]

        def combiners(t):
            return [split_free_beamformer(th, ucfg) for th in probes[:, t - 1]]

    kappa = 1.0 / grid.xi
    power = np.empty((K, T_r, grid.M))
    for t in range(1, T_r + 1):
        W = np.stack([materialize(w, grid.f) for w in combiners(t)])  # (K, M, N_r)
        comb = np.einsum("kmr,kmr->km", W.conj(), ue_cols)  # (K, M)
        eff = comb[..., None] * bs_eq  # (K, M, K): user k, subcarrier m, beam j
        Y = simulate_slot(np.swapaxes(eff, 0, 1), np.eye(K), pilots, kappa, cfg.sigma2, rng, cfg.rho)
        power[:, t - 1, :] = correlate(Y, pilots).T
    if tracker == "typical":
        power = power.sum(axis=2, keepdims=True)
    winners = detect_winner(power)
    theta_hat_r = cand[np.arange(K), winners[:, 0], winners[:, 1]]
    last_m = cand.shape[2] - 1
    edge = ((winners[:, 0] == 0) & (winners[:, 1] == 0)) | ((winners[:, 0] == T_r - 1) & (winners[:, 1] == last_m))
    stage2 = TrackingOutcome(theta_hat=theta_hat_r, winners=winners, power_table=power, candidates=cand,
                             overhead_used=T_r, out_of_range_risk=edge)
    return stage1.theta_hat, theta_hat_r, stage1, stage2
