"""Monte Carlo trials: draw users, track, precode, score.

Each trial gets its own generator seeded from ``(seed, trial)`` so results
do not depend on the order in which trials run.
"""

from __future__ import annotations

import numpy as np

from .analysis import quantization_bound, rate_lower_bound, sum_rate
from .beamform import (
    frequency_flat_beamformer,
    materialize_all,
    mmse_precoder,
    split_free_beamformer,
    zf_precoder,
)
from .channel import TrajectoryError, los_channels
from .syscfg import ConfigError, FrequencyGrid, SystemConfig
from .tracking import UserArray, track_beam_zoom, track_two_stage, track_typical, two_stage_channels

RATE_SCHEMES = ("optimal", "perfect", "zoom", "typical", "hybrid", "bound")
ZETA_BAR = (1, 2, 4)
MAX_DRAWS = 10_000


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def separated(theta, min_sep: float) -> bool:
    theta = np.sort(np.asarray(theta))
    return theta.size < 2 or float(np.min(np.diff(theta))) >= min_sep


def draw_users(K: int, N: int, alpha_max, rng: np.random.Generator, theta0=None):
    """Previous directions, variation ranges and next directions for one frame.

    Directions are redrawn until users are at least ``4/N`` apart and the
    next direction stays in [-1, 1].
    """
    alpha_max = np.broadcast_to(np.asarray(alpha_max, float), (K,))
    for _ in range(MAX_DRAWS):
        th0 = rng.uniform(-1.0, 1.0, K) if theta0 is None else np.asarray(theta0, float)
        alpha = rng.uniform(0.0, alpha_max)
        theta = th0 + rng.uniform(-1.0, 1.0, K) * alpha
        if np.all(np.abs(theta) <= 1) and separated(theta, 4 / N) and separated(th0, 4 / N):
            return th0, alpha, theta
    raise TrajectoryError(f"could not draw {K} separated in-range users in {MAX_DRAWS} attempts")


def precode(kind: str, H_eq, cfg: SystemConfig, A=None):
    if kind == "mmse":
        return mmse_precoder(H_eq, cfg.rho, cfg.sigma2, A)
    if kind == "zf":
        return zf_precoder(H_eq, cfg.rho, A)
    raise ConfigError(f"unknown precoder {kind!r}")


def beam_rate(cfg: SystemConfig, grid: FrequencyGrid, H, theta_beams, precoder: str = "mmse",
              flat: bool = False):
    """Rate when RF chain k points a beam at ``theta_beams[k]``.

    ``H`` is ``(K, M, N)``. ``flat=True`` uses phase-shifter-only beams.
    """
    make = frequency_flat_beamformer if flat else split_free_beamformer
    A = materialize_all([make(th, cfg) for th in theta_beams], grid)
    Hm = np.swapaxes(H, 0, 1)
    D = precode(precoder, Hm @ A, cfg, A)
    return sum_rate(Hm, A, D, cfg.sigma2)


def optimal_rate(cfg: SystemConfig, H, precoder: str = "mmse"):
    """Fully digital benchmark with perfect channel knowledge."""
    Hm = np.swapaxes(H, 0, 1)
    return sum_rate(Hm, None, precode(precoder, Hm, cfg), cfg.sigma2)


def draw_user_side(K: int, alpha_r: float, rng: np.random.Generator):
    """Previous and next user-side directions (no separation needed: arrays are per user)."""
    for _ in range(MAX_DRAWS):
        th0_r = rng.uniform(-1.0, 1.0, K)
        theta_r = th0_r + rng.uniform(-1.0, 1.0, K) * alpha_r
        if np.all(np.abs(theta_r) <= 1):
            return th0_r, theta_r
    raise TrajectoryError("could not draw in-range user-side directions")


def rate_trial(cfg: SystemConfig, grid: FrequencyGrid, users, T: int, rng: np.random.Generator,
               schemes=RATE_SCHEMES, precoder: str = "mmse", T_typical: int | None = None):
    """One frame of multi-user tracking followed by data transmission.

    ``users`` is ``(theta_prev, alpha, theta)`` as from ``draw_users``;
    ``rng`` drives the pilot noise. Returns a dict with the estimates and one
    ``R/M`` value per requested scheme.
    """
    th0, alpha, theta = users
    H = los_channels(grid, theta, cfg.N)
    out = {"theta_prev": th0, "alpha": alpha, "theta": theta}
    for name in schemes:
        if name == "optimal":
            out[name] = optimal_rate(cfg, H, precoder).sum_rate
        elif name == "perfect":
            out[name] = beam_rate(cfg, grid, H, theta, precoder).sum_rate
        elif name == "hybrid":
            out[name] = beam_rate(cfg, grid, H, theta, precoder, flat=True).sum_rate
        elif name == "zoom":
            res = track_beam_zoom(cfg, grid, H, th0, alpha, T, rng)
            out["theta_hat_zoom"], out["outcome_zoom"] = res.theta_hat, res
            out[name] = beam_rate(cfg, grid, H, res.theta_hat, precoder).sum_rate
        elif name == "typical":
            res = track_typical(cfg, grid, H, th0, alpha, T_typical or T, rng)
            out["theta_hat_typical"], out["outcome_typical"] = res.theta_hat, res
            out[name] = beam_rate(cfg, grid, H, res.theta_hat, precoder).sum_rate
        elif name == "bound":
            lb = rate_lower_bound(cfg, grid, theta, alpha, T, cfg.rho, cfg.sigma2)
            out[name] = float(lb.sum()) / grid.M
        else:
            raise ConfigError(f"unknown scheme {name!r}")
    return out


def accuracy_trial(cfg: SystemConfig, grid: FrequencyGrid, users, alpha_max: float, T: int,
                   rng: np.random.Generator, zeta_bar=ZETA_BAR):
    """Zoom tracking errors and whether each is within ``zeta_bar`` quantization steps.

    The step is ``quantization_bound(alpha_max, T)``.
    """
    th0, alpha, theta = users
    H = los_channels(grid, theta, cfg.N)
    res = track_beam_zoom(cfg, grid, H, th0, alpha, T, rng)
    err = np.abs(res.theta_hat - theta)
    step = quantization_bound(alpha_max, T, grid)
    hits = {z: err <= z * step for z in zeta_bar}
    return {"theta_prev": th0, "alpha": alpha, "theta": theta, "theta_hat": res.theta_hat,
            "error": err, "hits": hits, "outcome": res}


def two_stage_trial(cfg: SystemConfig, grid: FrequencyGrid, user: UserArray, users, user_side, alpha_r: float,
                    T: int, rng: np.random.Generator, precoder: str = "mmse",
                    schemes=("optimal", "perfect", "zoom", "typical", "hybrid")):
    """Multi-antenna users: track both ends, then transmit through the combined channel.

    ``user_side`` is ``(theta_prev_r, theta_r)`` as from ``draw_user_side``.
    """
    th0, alpha, theta = users
    th0_r, theta_r = user_side
    bs_rows, ue_cols = two_stage_channels(grid, theta, theta_r, cfg.N, user.N_r)
    ucfg = user.as_config(cfg)

    def combined(theta_ue_beams, flat=False):
        make = frequency_flat_beamformer if flat else split_free_beamformer
        W = np.stack([materialize_all([make(th, ucfg)], grid)[..., 0] for th in theta_ue_beams])  # (K, M, N_r)
        return np.einsum("kmr,kmr->km", W.conj(), ue_cols)[..., None] * bs_rows

    out = {"theta": theta, "theta_r": theta_r}
    for name in schemes:
        if name == "optimal":
            out[name] = optimal_rate(cfg, combined(theta_r), precoder).sum_rate
        elif name == "perfect":
            out[name] = beam_rate(cfg, grid, combined(theta_r), theta, precoder).sum_rate
        elif name == "hybrid":
            out[name] = beam_rate(cfg, grid, combined(theta_r, flat=True), theta, precoder, flat=True).sum_rate
        elif name in ("zoom", "typical"):
            bs_hat, ue_hat, _, _ = track_two_stage(cfg, user, grid, theta, theta_r, th0, th0_r, alpha, alpha_r,
                                                   T, T, rng, tracker=name)
            out[f"theta_hat_{name}"], out[f"theta_r_hat_{name}"] = bs_hat, ue_hat
            out[name] = beam_rate(cfg, grid, combined(ue_hat), bs_hat, precoder).sum_rate
        else:
            raise ConfigError(f"unknown scheme {name!r}")
    return out
