"""Run a ScenarioSpec and write its CSV files.

Files written to the output directory:

``results.csv``
    One row per (sweep value, trial, frame), columns ``RESULT_FIELDS``.
``tracking.csv``
    One row per user per result row, columns ``TRACKING_FIELDS``.
``failures.csv``
    Trials that raised, with the seed needed to replay them.
``summary.csv``
    Means over trials per sweep value (what the figures plot).
``pattern.csv`` / ``beams.csv``
    Only for ``kind: pattern``.

Subcarrier and slot indices in every file are 1-based. Rows are ordered by
(sweep value, trial, frame) whatever the number of worker processes.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from .beamform import array_gain, materialize, zoom_beamformer, zoom_directions
from .channel import explicit_trajectory, los_channels
from .experiments import (
    ZETA_BAR,
    accuracy_trial,
    draw_user_side,
    draw_users,
    rate_trial,
    two_stage_trial,
)
from .scenario import ScenarioSpec
from .syscfg import build_frequency_grid
from .tracking import track_beam_zoom, track_typical

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RATE_COLUMNS = ("optimal", "perfect", "zoom", "typical", "hybrid", "bound")
RESULT_FIELDS = (
    ["schema_version", "scenario", "trial", "frame", "sweep_axis", "sweep_value", "theta", "theta_hat"]
    + [f"rate_{s}" for s in RATE_COLUMNS]
    + [f"accuracy_z{z}" for z in ZETA_BAR]
    + ["elapsed_ms"]
)
TRACKING_FIELDS = ["schema_version", "scenario", "trial", "frame", "sweep_value", "tracker", "user",
                   "theta_prev", "alpha", "theta", "theta_hat", "error", "slot", "subcarrier", "max_power",
                   "out_of_range_risk"]
FAILURE_FIELDS = ["schema_version", "scenario", "trial", "sweep_value", "seed", "error_type", "message"]
OUT_ENV = "BEAMZOOM_OUT"


@dataclass
class ResultRow:
    scenario: str
    trial: int
    frame: int
    sweep_axis: str
    sweep_value: float
    theta: tuple
    theta_hat: tuple = ()
    rates: dict | None = None
    accuracy: dict | None = None
    elapsed_ms: float | None = None

    def as_record(self) -> dict:
        rec = {
            "schema_version": SCHEMA_VERSION, "scenario": self.scenario, "trial": self.trial, "frame": self.frame,
            "sweep_axis": self.sweep_axis, "sweep_value": _fmt(self.sweep_value),
            "theta": _join(self.theta), "theta_hat": _join(self.theta_hat),
        }
        for s in RATE_COLUMNS:
            v = (self.rates or {}).get(s)
            rec[f"rate_{s}"] = "" if v is None else _fmt(v)
        for z in ZETA_BAR:
            v = (self.accuracy or {}).get(z)
            rec[f"accuracy_z{z}"] = "" if v is None else _fmt(v)
        rec["elapsed_ms"] = "" if self.elapsed_ms is None else f"{self.elapsed_ms:.1f}"
        return rec


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.10g}"


def _join(xs) -> str:
    return ";".join(_fmt(x) for x in xs)


def output_dir(spec: ScenarioSpec, out=None) -> Path:
    """``out`` argument, else ``$BEAMZOOM_OUT/<id>``, else the spec's ``outputs``, else ``out/<id>``."""
    if out is not None:
        return Path(out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV]) / spec.id
    return Path(spec.outputs or Path("out") / spec.id)


def stream(seed: int, trial: int, *tag) -> np.random.Generator:
    return np.random.default_rng([seed, trial, *tag])


def _tracking_records(spec, trial, frame, value, tracker, outcome, theta_prev, alpha, theta):
    recs = []
    for k in range(len(theta)):
        t, m = outcome.winners[k]
        recs.append({
            "schema_version": SCHEMA_VERSION, "scenario": spec.id, "trial": trial, "frame": frame,
            "sweep_value": _fmt(value), "tracker": tracker, "user": k + 1,
            "theta_prev": _fmt(theta_prev[k]), "alpha": _fmt(alpha[k]), "theta": _fmt(theta[k]),
            "theta_hat": _fmt(outcome.theta_hat[k]), "error": _fmt(abs(outcome.theta_hat[k] - theta[k])),
            "slot": int(t) + 1, "subcarrier": int(m) + 1,
            "max_power": _fmt(outcome.power_table[k, t, m]),
            "out_of_range_risk": int(outcome.out_of_range_risk[k]),
        })
    return recs


def _unit(spec: ScenarioSpec, j: int, trial: int, timing: bool = False):
    """Compute one (sweep index, trial) cell; returns (result rows, tracking rows, failure or None)."""
    value = spec.sweep.values[j]
    start = time.perf_counter()
    rows, track = [], []
    try:
        if spec.kind == "trajectory":
            rows, track = _trajectory(spec, trial, value)
        else:
            rows, track = _monte_carlo(spec, j, trial, value)
    except Exception as exc:  # noqa: BLE001 - any trial error is recorded, the sweep goes on
        log.warning("trial %d at %s=%s failed: %s", trial, spec.sweep.axis, value, exc)
        return [], [], {"schema_version": SCHEMA_VERSION, "scenario": spec.id, "trial": trial,
                        "sweep_value": _fmt(value), "seed": spec.seed, "error_type": type(exc).__name__,
                        "message": str(exc)}
    if timing:
        ms = (time.perf_counter() - start) * 1e3
        for r in rows:
            r.elapsed_ms = ms / max(len(rows), 1)
    return rows, track, None


def _config_at(spec: ScenarioSpec, value):
    snr = value if spec.sweep.axis == "snr_db" else spec.snr_db
    T = int(value) if spec.sweep.axis == "T" else spec.T
    return spec.system.with_snr_db(snr), T


def _monte_carlo(spec: ScenarioSpec, j: int, trial: int, value):
    cfg, T = _config_at(spec, value)
    grid = build_frequency_grid(cfg)
    alpha_max = [u.alpha_max for u in spec.users]
    users = draw_users(cfg.K, cfg.N, alpha_max, stream(spec.seed, trial, 0))
    rng = stream(spec.seed, trial, 1, j)
    row = ResultRow(spec.id, trial, 0, spec.sweep.axis, value, tuple(users[2]))
    track = []
    if spec.kind == "accuracy":
        res = accuracy_trial(cfg, grid, users, spec.alpha_max, T, rng)
        row.theta_hat = tuple(res["theta_hat"])
        row.accuracy = {z: float(np.mean(h)) for z, h in res["hits"].items()}
        track = _tracking_records(spec, trial, 0, value, "zoom", res["outcome"], *users)
    elif spec.kind == "rate":
        res = rate_trial(cfg, grid, users, T, rng, spec.schemes, spec.precoder)
        row.theta_hat = tuple(res.get("theta_hat_zoom", res.get("theta_hat_typical", ())))
        row.rates = {s: res[s] for s in spec.schemes}
        for name in ("zoom", "typical"):
            if f"outcome_{name}" in res:
                track += _tracking_records(spec, trial, 0, value, name, res[f"outcome_{name}"], *users)
    elif spec.kind == "two_stage":
        side = draw_user_side(cfg.K, spec.alpha_r, stream(spec.seed, trial, 2))
        res = two_stage_trial(cfg, grid, spec.user_array, users, side, spec.alpha_r, T, rng,
                              spec.precoder, spec.schemes)
        row.theta_hat = tuple(res.get("theta_hat_zoom", ()))
        row.rates = {s: res[s] for s in spec.schemes}
    else:
        raise ValueError(f"kind {spec.kind!r} is not a Monte Carlo scenario")
    return [row], track


def _trajectory(spec: ScenarioSpec, trial: int, frames: int):
    """Track explicit user paths frame by frame, re-centering on the last estimate."""
    cfg = spec.system.with_snr_db(spec.snr_db)
    grid = build_frequency_grid(cfg)
    traj = explicit_trajectory([u.theta0 for u in spec.users],
                               np.column_stack([u.deltas[:frames] for u in spec.users]),
                               [u.alpha for u in spec.users])
    rng = stream(spec.seed, trial, 1, 0)
    tracker = track_typical if spec.tracker == "typical" else track_beam_zoom
    prev = traj.theta[0].copy()
    rows, track = [], []
    for i in range(1, frames + 1):
        theta = traj.theta[i]
        H = los_channels(grid, theta, cfg.N)
        res = tracker(cfg, grid, H, prev, traj.alpha, spec.T, rng)
        rows.append(ResultRow(spec.id, trial, i, "frames", frames, tuple(theta), tuple(res.theta_hat)))
        track += _tracking_records(spec, trial, i, frames, spec.tracker, res, prev, traj.alpha, theta)
        prev = res.theta_hat
    return rows, track


def pattern_tables(spec: ScenarioSpec):
    """Gain of every subcarrier's zoomed beam over a direction grid, plus per-beam peaks."""
    cfg = spec.system
    grid = build_frequency_grid(cfg)
    user = spec.users[0]
    step = spec.pattern.get("step", 1e-4)
    theta0, alpha = user.theta0, user.alpha
    bf = zoom_beamformer(theta0, alpha, cfg, grid)
    predicted = zoom_directions(theta0, alpha, grid)
    span = np.arange(theta0 - 4 * alpha, theta0 + 4 * alpha + step / 2, step)
    pattern, beams = [], []
    for m in range(grid.M):
        gains = array_gain(materialize(bf, grid.f[m]), span, grid.xi[m])
        peak = int(np.argmax(gains))
        beams.append({"subcarrier": m + 1, "f_ghz": _fmt(grid.f[m] / 1e9), "predicted": _fmt(predicted[m]),
                      "argmax": _fmt(span[peak]), "peak_gain": _fmt(gains[peak])})
        pattern += [{"subcarrier": m + 1, "theta": _fmt(th), "gain": _fmt(g)} for th, g in zip(span, gains)]
    return pattern, beams


class _Sink:
    def __init__(self, path: Path, fields):
        self.fh = open(path, "w", newline="")
        self.writer = csv.DictWriter(self.fh, fieldnames=fields, lineterminator="\n")
        self.writer.writeheader()

    def write(self, recs):
        self.writer.writerows(recs)
        self.fh.flush()

    def close(self):
        self.fh.close()


def _write_table(path: Path, fields, recs):
    sink = _Sink(path, fields)
    sink.write(recs)
    sink.close()


def summarize(spec: ScenarioSpec, rows) -> list[dict]:
    """Mean of every rate / accuracy column per sweep value (trajectory: per frame)."""
    key = (lambda r: r.frame) if spec.kind == "trajectory" else (lambda r: r.sweep_value)
    groups: dict = {}
    for r in rows:
        groups.setdefault(key(r), []).append(r)
    out = []
    for k in sorted(groups):
        g = groups[k]
        rec = {"x": _fmt(k), "trials": len(g)}
        for s in RATE_COLUMNS:
            vals = [r.rates[s] for r in g if r.rates and s in r.rates]
            if vals:
                rec[f"rate_{s}"] = _fmt(np.mean(vals))
        for z in ZETA_BAR:
            vals = [r.accuracy[z] for r in g if r.accuracy]
            if vals:
                rec[f"accuracy_z{z}"] = _fmt(np.mean(vals))
        if spec.kind == "trajectory":
            for u, (th, hat) in enumerate(zip(g[0].theta, g[0].theta_hat), start=1):
                rec[f"theta_{u}"], rec[f"theta_hat_{u}"] = _fmt(th), _fmt(hat)
        out.append(rec)
    return out


def run_scenario(spec: ScenarioSpec, out=None, jobs: int = 1, timing: bool = False, write: bool = True):
    """Run every (sweep value, trial) cell and write the CSV files.

    Returns ``(rows, summary)``; for ``kind: pattern`` these are the gain
    table and the per-beam table. With ``write=False`` nothing touches the
    disk.
    """
    out_dir = output_dir(spec, out)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
    if spec.kind == "pattern":
        pattern, beams = pattern_tables(spec)
        if write:
            _write_table(out_dir / "pattern.csv", ["subcarrier", "theta", "gain"], pattern)
            _write_table(out_dir / "beams.csv", list(beams[0]), beams)
        return pattern, beams

    sinks = None
    if write:
        sinks = (_Sink(out_dir / "results.csv", RESULT_FIELDS), _Sink(out_dir / "tracking.csv", TRACKING_FIELDS),
                 _Sink(out_dir / "failures.csv", FAILURE_FIELDS))
    trials = 1 if spec.kind == "trajectory" else spec.trials
    cells = [(j, t) for j in range(len(spec.sweep.values)) for t in range(trials)]
    work = partial(_cell, spec, timing)
    all_rows = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(work, cells, chunksize=max(1, len(cells) // (4 * jobs)))
                all_rows = _drain(results, sinks)
        else:
            all_rows = _drain(map(work, cells), sinks)
    finally:
        if sinks:
            for s in sinks:
                s.close()
    summary = summarize(spec, all_rows)
    if write and summary:
        fields = list(dict.fromkeys(k for rec in summary for k in rec))
        _write_table(out_dir / "summary.csv", fields, summary)
    return all_rows, summary


def _cell(spec, timing, cell):
    j, trial = cell
    return _unit(spec, j, trial, timing)


def _drain(results, sinks):
    all_rows = []
    for rows, track, failure in results:
        all_rows += rows
        if sinks:
            sinks[0].write([r.as_record() for r in rows])
            sinks[1].write(track)
            if failure:
                sinks[2].write([failure])
    return all_rows


def failure_count(out_dir) -> int:
    with open(Path(out_dir) / "failures.csv") as fh:
        return sum(1 for _ in fh) - 1

