"""Independent reference computations used by the tests.

Nothing here calls the closed forms in ``beamzoom``; each oracle rebuilds
its answer from first principles (brute force or a direct linear solve).
"""

import numpy as np


def grid_xi(M, f_c, B):
    f = f_c + (B / M) * (np.arange(M) - (M - 1) / 2)
    return f / f_c


def array_gain_direct(weights, theta, xi):
    """``|sum_n conj(a_n) w_n|`` with ``a_n = exp(j pi n xi theta)/sqrt(N)``, looped over directions."""
    N = weights.size
    n = np.arange(N)
    out = []
    for th in np.atleast_1d(theta):
        a = np.exp(1j * np.pi * n * xi * th) / np.sqrt(N)
        out.append(abs(np.vdot(a, weights)))
    return np.array(out)


def slot_fit(lo, hi, xi, P):
    """PS direction and delay slope putting subcarrier 1 at ``lo`` and M at ``hi``.

    Beam m points at ``phi/xi_m + 2 (1 - xi_m) s / (xi_m P)``; two endpoint
    equations fix ``(phi, s)``. ``lo``/``hi`` may be arrays.
    """
    x1, xM = xi[0], xi[-1]
    Amat = np.array([[1 / x1, 2 * (1 - x1) / (x1 * P)], [1 / xM, 2 * (1 - xM) / (xM * P)]])
    sol = np.linalg.solve(Amat, np.vstack([np.atleast_1d(lo), np.atleast_1d(hi)]))
    return sol[0], sol[1]


def worst_beta(theta, alpha, T, xi, P, descending):
    """Largest ``|beta|`` over slots and subcarriers for each direction in ``theta``."""
    theta = np.atleast_1d(theta)
    worst = np.zeros_like(theta)
    for t in range(1, T + 1):
        lo = theta - alpha + 2 * (t - 1) * alpha / T
        hi = lo + 2 * alpha / T
        a, b = np.where(descending, hi, lo), np.where(descending, lo, hi)
        phi, s = slot_fit(a, b, xi, P)
        beta = 2 * (1 - xi[None, :]) * s[:, None]
        worst = np.maximum(worst, np.abs(beta).max(axis=1))
    return worst


def t_min_dense(xi, P, alpha, step=1e-3, orientation="auto", T_limit=1024):
    """Brute-force T_min over a dense direction grid on [-1, 1]."""
    theta = np.linspace(-1, 1, int(round(2 / step)) + 1)
    descending = (theta > 0) if orientation == "auto" else np.zeros_like(theta, bool)
    for T in range(1, T_limit + 1):
        if np.all(worst_beta(theta, alpha, T, xi, P, descending) <= 1 + 1e-12):
            return T
    return None


def nearest_distance(candidates, theta):
    c = np.sort(np.ravel(candidates))
    theta = np.atleast_1d(theta)
    i = np.clip(np.searchsorted(c, theta), 1, c.size - 1)
    return np.minimum(np.abs(theta - c[i - 1]), np.abs(theta - c[i]))


def random_configs(n, seed):
    """``n`` random (N, M, K_d, f_c, B, alpha) draws with split-free beams feasible and T_min nontrivial."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        K_d = int(rng.choice([4, 8, 16, 32]))
        P = int(rng.choice([8, 16, 32]))
        M = int(rng.choice([16, 32, 64, 128]))
        f_c = float(rng.choice([60e9, 100e9, 140e9, 300e9]))
        B = f_c * float(rng.uniform(0.01, 0.1))
        alpha = float(rng.uniform(0.05, 0.4))
        xi = grid_xi(M, f_c, B)
        if P * np.max(np.abs(xi - 1)) * (1 + alpha) >= 0.95:  # no T would do
            continue
        out.append(dict(N=K_d * P, M=M, K_d=K_d, f_c=f_c, B=B, alpha=alpha))
    return out
