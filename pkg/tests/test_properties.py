"""Invariant suites: constant modulus, unit norm, Dirichlet equivalence,
ZF zero leakage, candidate containment and determinism.

Self-contained; nothing here loads a figure preset.
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from beamzoom import SystemConfig, build_frequency_grid
from beamzoom.beamform import (
    array_gain,
    fan_sign,
    linear_delay_beamformer,
    materialize,
    materialize_all,
    pattern_gain,
    split_free_beamformer,
    zf_precoder,
    zoom_beamformer,
)
from beamzoom.channel import los_channels
from beamzoom.tracking import target_directions, track_beam_zoom

from oracles import array_gain_direct

CFG = SystemConfig(N=256, M=128, K=4, K_d=16, f_c=100e9, B=10e9)
GRID = build_frequency_grid(CFG)
SMALL = SystemConfig(N=64, M=16, K=2, K_d=8, f_c=100e9, B=10e9, Q=4)
SMALL_GRID = build_frequency_grid(SMALL)

direction = st.floats(-1, 1, allow_nan=False)
fast = settings(max_examples=40, deadline=None)


@fast
@given(phi=direction, s=st.floats(-20, 20))
def test_constant_modulus(phi, s):
    bf = linear_delay_beamformer(phi, s, CFG)
    assert np.allclose(np.abs(bf.ps_blocks), 1 / np.sqrt(CFG.N))
    F = materialize(bf, GRID.f)
    assert np.allclose(np.abs(F), 1 / np.sqrt(CFG.N))


@fast
@given(theta=st.floats(-0.9, 0.9), alpha=st.floats(0.001, 0.05))
def test_zoom_beams_unit_norm(theta, alpha):
    F = materialize(zoom_beamformer(theta, fan_sign(theta) * alpha, CFG, GRID), GRID.f)
    assert np.allclose(np.linalg.norm(F, axis=1), 1.0)


@fast
@given(phi=direction, s=st.floats(-4, 4), theta=direction, m=st.integers(0, SMALL.M - 1))
def test_dirichlet_equivalence(phi, s, theta, m):
    bf = linear_delay_beamformer(phi, s, SMALL)
    f = materialize(bf, SMALL_GRID.f[m])
    xi = SMALL_GRID.xi[m]
    direct = array_gain_direct(f, theta, xi)[0]
    closed = pattern_gain(phi, bf.beta(xi), theta, xi, SMALL.K_d, SMALL.P)
    assert abs(direct - closed) < 1e-9
    assert abs(array_gain(f, theta, xi) - direct) < 1e-12


@fast
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 4))
def test_zf_zero_leakage(seed, K):
    rng = np.random.default_rng(seed)
    # one user per disjoint slice of [-1, 1] keeps ZF well conditioned
    theta = -1 + (np.arange(K) + rng.uniform(0.1, 0.9, K)) * 2 / K
    cfg = CFG.replace(K=K)
    H = np.swapaxes(los_channels(GRID, theta, cfg.N), 0, 1)
    A = materialize_all([split_free_beamformer(t, cfg) for t in theta], GRID)
    D = zf_precoder(H @ A, cfg.rho, A)
    G = H @ A @ D
    off = G - np.einsum("mkk->mk", G)[..., None] * np.eye(K)
    assert np.max(np.abs(off)) < 1e-9 * np.max(np.abs(G))
    assert np.allclose(np.linalg.norm(A @ D, axis=1), np.sqrt(cfg.rho))


@fast
@given(theta=st.floats(-1, 1), alpha=st.floats(1e-3, 0.3), T=st.integers(1, 12))
def test_candidate_containment(theta, alpha, T):
    for signed in (alpha, -alpha):
        cand = target_directions(theta, signed, T, GRID).flat()
        slack = 1e-12 * max(1.0, abs(theta))
        assert np.all(cand >= theta - alpha - slack)
        assert np.all(cand <= theta + alpha + slack)
        assert abs(cand.min() - (theta - alpha)) < 1e-9
        assert abs(cand.max() - (theta + alpha)) < 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**63 - 1))
def test_tracking_determinism(seed):
    cfg = SMALL.with_snr_db(5)
    theta_prev = np.array([-0.3, 0.4])
    H = los_channels(SMALL_GRID, theta_prev + 0.01, cfg.N)
    runs = [track_beam_zoom(cfg, SMALL_GRID, H, theta_prev, 0.05, 4, np.random.default_rng(seed))
            for _ in range(2)]
    assert np.array_equal(runs[0].theta_hat, runs[1].theta_hat)
    assert np.array_equal(runs[0].power_table, runs[1].power_table)
