"""Acceptance suite: one test per headline claim, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdicts are
listed in the "acceptance" section of the terminal summary.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from beamzoom import SystemConfig, build_frequency_grid
from beamzoom.analysis import quantization_bound, rate_lower_bound, t_min
from beamzoom.beamform import array_gain, frequency_flat_beamformer, materialize, split_free_beamformer
from beamzoom.beamform import zoom_beamformer, zoom_directions
from beamzoom.channel import los_channels
from beamzoom.experiments import accuracy_trial, beam_rate, draw_users, optimal_rate
from beamzoom.tracking import target_directions, track_beam_zoom, track_typical

from oracles import array_gain_direct, nearest_distance, random_configs, t_min_dense

REF = SystemConfig(N=256, M=128, K=4, K_d=16, f_c=100e9, B=10e9, Q=10)
REF_GRID = build_frequency_grid(REF)
TESTS = Path(__file__).parent


def users_for(trial, K=4, alpha_max=0.1, seed=0):
    return draw_users(K, REF.N, alpha_max, np.random.default_rng([seed, trial, 0]))


def noise_for(trial, tag=0, seed=0):
    return np.random.default_rng([seed, trial, 1, tag])


def test_criterion_1_overhead_bound(verdict):
    T = t_min(REF, REF_GRID, 0.1).T_min
    mismatches = []
    for c in random_configs(50, seed=1):
        alpha = c.pop("alpha")
        cfg = SystemConfig(K=1, **c)
        grid = build_frequency_grid(cfg)
        got = t_min(cfg, grid, alpha).T_min
        want = t_min_dense(np.asarray(grid.xi), cfg.P, alpha, step=1e-3)
        if got != want:
            mismatches.append((c, alpha, got, want))
    alphas = np.linspace(0.01, 0.5, 25)
    monotone = all(np.diff([t_min(REF, REF_GRID, a).T_min for a in alphas]) >= 0)
    ok = T == 2 and not mismatches and monotone
    verdict(1, ok, f"T_min={T} (want 2); oracle mismatches {len(mismatches)}/50; monotone in alpha: {monotone}")


def test_criterion_2_quantization_bound(verdict):
    q = quantization_bound(0.1, 2, REF_GRID)
    ok = abs(q - 4.3e-4) <= 1e-5
    verdict(2, ok, f"quantization_bound = {q:.5e} (want 4.3e-4 +/- 1e-5)")


def test_criterion_3_zoom_geometry(verdict):
    cfg = SystemConfig(N=256, M=32, K=1, K_d=16, f_c=100e9, B=10e9)
    grid = build_frequency_grid(cfg)
    pred = zoom_directions(-0.025, 0.025, grid)
    bf = zoom_beamformer(-0.025, 0.025, cfg, grid)
    F = materialize(bf, grid.f)
    scan = np.arange(-0.07, 0.02, 1e-5)
    err = max(abs(scan[np.argmax(array_gain_direct(F[m], scan, grid.xi[m]))] - pred[m]) for m in range(32))
    increasing = bool(np.all(np.diff(pred) > 0))
    ends = abs(pred[0] + 0.05) <= 1e-9 and abs(pred[-1]) <= 1e-9
    ok = len(pred) == 32 and increasing and ends and err <= 2e-4
    verdict(3, ok, f"endpoints [{pred[0]:.3g}, {pred[-1]:.3g}], increasing={increasing}, "
                   f"max argmax error {err:.2e} (limit 2e-4)")


def test_criterion_4_tracking_accuracy(verdict):
    cfg = REF.with_snr_db(10)
    hits = []
    for trial in range(500):
        res = accuracy_trial(cfg, REF_GRID, users_for(trial), 0.1, 2, noise_for(trial), zeta_bar=(4,))
        hits.extend(res["hits"][4])
    p = float(np.mean(hits))
    verdict(4, p >= 0.99, f"P(error <= 4 zeta alpha/(TM)) = {p:.4f} over {len(hits)} user estimates (want >= 0.99)")


def test_criterion_5_near_optimal_rate(verdict):
    cfg = REF.with_snr_db(30)
    zoom, best = [], []
    for trial in range(200):
        th0, alpha, theta = users_for(trial)
        H = los_channels(REF_GRID, theta, cfg.N)
        res = track_beam_zoom(cfg, REF_GRID, H, th0, alpha, 3, noise_for(trial))
        zoom.append(beam_rate(cfg, REF_GRID, H, res.theta_hat, "mmse").sum_rate)
        best.append(optimal_rate(cfg, H, "mmse").sum_rate)
    ratio = np.mean(zoom) / np.mean(best)
    verdict(5, ratio >= 0.95, f"zoom/optimal = {ratio:.4f} ({np.mean(zoom):.3f} of {np.mean(best):.3f} bit/s/Hz "
                              f"per subcarrier; want >= 0.95)")


def _first_T(tracker, cfg, trials, best, T_max):
    """Smallest T whose mean beam-selection rate reaches 95% of the optimum."""
    for T in range(1, T_max + 1):
        if tracker is track_beam_zoom and T < t_min(cfg, REF_GRID, 0.1).T_min:
            continue
        rates = []
        for trial, (th0, alpha, theta, H) in enumerate(trials):
            res = tracker(cfg, REF_GRID, H, th0, alpha, T, noise_for(trial, T))
            rates.append(beam_rate(cfg, REF_GRID, H, res.theta_hat, "mmse").sum_rate)
        if np.mean(rates) >= 0.95 * best:
            return T, np.mean(rates) / best
    return None, None


def test_criterion_6_overhead_reduction(verdict):
    cfg = REF.with_snr_db(30)
    trials = []
    for trial in range(200):
        th0, alpha, theta = users_for(trial)
        trials.append((th0, alpha, theta, los_channels(REF_GRID, theta, cfg.N)))
    best = np.mean([optimal_rate(cfg, t[3], "mmse").sum_rate for t in trials])
    T_zoom, r_zoom = _first_T(track_beam_zoom, cfg, trials, best, 60)
    T_typ, r_typ = _first_T(track_typical, cfg, trials, best, 60)
    found = T_zoom is not None and T_typ is not None
    ratio = T_zoom / T_typ if found else float("nan")
    verdict(6, found and ratio <= 0.2, f"95% of optimum first reached at T={T_zoom} (zoom) and T={T_typ} "
                                      f"(typical); ratio {ratio:.3f} (want <= 0.2)")


def test_criterion_7_rate_bound(verdict):
    cfg = REF.replace(K=1).with_snr_db(10)
    T = 2
    worst, worst_pipeline = np.inf, np.inf
    quiet = cfg.replace(sigma2=0.0)
    for trial in range(100):
        th0, alpha, theta = users_for(trial, K=1)
        H = los_channels(REF_GRID, theta, cfg.N)
        lb = rate_lower_bound(cfg, REF_GRID, theta, alpha, T, cfg.rho, cfg.sigma2)
        # noiseless detection: the candidate closest to the true direction wins
        cand = target_directions(th0[0], alpha[0] * (-1.0 if th0[0] > 0 else 1.0), T, REF_GRID).flat()
        best = cand[np.argmin(np.abs(cand - theta[0]))]
        assert nearest_distance(cand, theta)[0] == abs(best - theta[0])
        rate = beam_rate(cfg, REF_GRID, H, [best], "zf").per_user_per_subcarrier
        worst = min(worst, float(np.min(rate - lb)))
        # same, with the tracker's own argmax at sigma2 = 0 (reported, not judged)
        res = track_beam_zoom(quiet, REF_GRID, H, th0, alpha, T, noise_for(trial))
        rate_p = beam_rate(cfg, REF_GRID, H, res.theta_hat, "zf").per_user_per_subcarrier
        worst_pipeline = min(worst_pipeline, float(np.min(rate_p - lb)))
    verdict(7, worst >= -1e-9, f"min(rate - bound) = {worst:+.3e} over 100 x 128 entries (tolerance 1e-9); "
                               f"tracker argmax at sigma2=0 gives {worst_pipeline:+.3e}")


def test_criterion_8_beam_split(verdict):
    cfg = SystemConfig(N=256, M=128, K=1, K_d=16, f_c=100e9, B=10e9)
    grid = build_frequency_grid(cfg)
    theta = 0.15
    flat = materialize(frequency_flat_beamformer(theta, cfg), grid.f)
    dpp = materialize(split_free_beamformer(theta, cfg, grid), grid.f)
    g_flat = np.array([array_gain(flat[m], theta, grid.xi[m]) for m in range(grid.M)])
    g_dpp = np.array([array_gain(dpp[m], theta, grid.xi[m]) for m in range(grid.M)])
    edges = max(g_flat[0], g_flat[-1])
    ok = edges < 0.4 and g_dpp.min() > 0.99
    verdict(8, ok, f"theta={theta}: zero-delay edge gains {g_flat[0]:.3f}/{g_flat[-1]:.3f} (want < 0.4), "
                   f"split-free min gain {g_dpp.min():.4f} (want > 0.99)")


def test_criterion_9_property_suites_standalone(verdict):
    script = (
        "import sys, pytest\n"
        f"rc = pytest.main(['-q', '-p', 'no:cacheprovider', {str(TESTS / 'test_properties.py')!r}])\n"
        "loaded = sorted(m for m in sys.modules if m in ('beamzoom.scenario', 'beamzoom.runner', "
        "'beamzoom.presets'))\n"
        "print('PRESET_MODULES', loaded)\n"
        "sys.exit(int(rc))\n"
    )
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-c", script], capture_output=True, text=True, cwd=TESTS.parent)
    elapsed = time.perf_counter() - start
    tail = [ln for ln in proc.stdout.splitlines() if ln.strip()][-2:]
    no_presets = "PRESET_MODULES []" in proc.stdout
    ok = proc.returncode == 0 and no_presets and elapsed < 60
    verdict(9, ok, f"{' | '.join(tail)}; {elapsed:.1f} s")
