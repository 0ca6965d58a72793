"""Figures rendered from the CSV tables a run produced."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "optimal": "fully digital MMSE (perfect CSI)",
    "perfect": "beam selection, true directions",
    "zoom": "beam selection, zoom tracking",
    "typical": "beam selection, exhaustive tracking",
    "hybrid": "phase shifters only, true directions",
    "bound": "lower bound",
}
XLABEL = {"T": "training overhead T (slots)", "snr_db": "SNR (dB)", "frames": "frame"}


def _col(recs, key):
    return [float(r[key]) for r in recs]


def _save(fig, out_dir: Path, name: str, svg: bool) -> list[Path]:
    paths = [out_dir / f"{name}.png"]
    if svg:
        paths.append(out_dir / f"{name}.svg")
    for p in paths:
        fig.savefig(p, dpi=120, bbox_inches="tight", metadata={"Date": None} if p.suffix == ".svg" else None)
    plt.close(fig)
    return paths


def plot_pattern(pattern, beams, out_dir, name="pattern", svg=False):
    fig, ax = plt.subplots(figsize=(7, 4))
    by_m = {}
    for r in pattern:
        by_m.setdefault(r["subcarrier"], ([], []))
        by_m[r["subcarrier"]][0].append(float(r["theta"]))
        by_m[r["subcarrier"]][1].append(float(r["gain"]))
    for m, (x, y) in by_m.items():
        ax.plot(x, y, lw=0.8)
    ax.set_xlabel("physical direction")
    ax.set_ylabel("normalized array gain")
    ax.set_title(f"{len(beams)} zoomed subcarrier beams")
    ax.grid(alpha=0.3)
    return _save(fig, Path(out_dir), name, svg)


def plot_trajectory(summary, out_dir, name="trajectory", svg=False):
    fig, ax = plt.subplots(figsize=(7, 4))
    x = _col(summary, "x")
    users = sorted({k.split("_")[-1] for k in summary[0] if k.startswith("theta_hat_")}, key=int)
    for u in users:
        line, = ax.plot(x, _col(summary, f"theta_{u}"), lw=1, label=f"user {u}")
        ax.plot(x, _col(summary, f"theta_hat_{u}"), "o", ms=3, color=line.get_color())
    ax.set_xlabel("frame")
    ax.set_ylabel("physical direction (line: true, dots: tracked)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, Path(out_dir), name, svg)


def plot_series(summary, axis, out_dir, name, svg=False, prefix="rate_", ylabel="sum-rate (bits/s/Hz)"):
    """One line per column starting with ``prefix``."""
    fig, ax = plt.subplots(figsize=(7, 4))
    x = _col(summary, "x")
    keys = [k for k in summary[0] if k.startswith(prefix)]
    for k in keys:
        scheme = k[len(prefix):]
        label = LABELS.get(scheme, f"error <= {scheme[1:]} quantization steps")
        ax.plot(x, _col(summary, k), marker="o", ms=3, label=label)
    ax.set_xlabel(XLABEL[axis])
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, Path(out_dir), name, svg)


def render(spec, rows, summary, out_dir, svg=False) -> list[Path]:
    """Figures for one finished scenario (``rows``/``summary`` as returned by ``run_scenario``)."""
    if spec.kind == "pattern":
        return plot_pattern(rows, summary, out_dir, spec.id, svg)
    if not summary:
        return []
    if spec.kind == "trajectory":
        return plot_trajectory(summary, out_dir, spec.id, svg)
    if spec.kind == "accuracy":
        return plot_series(summary, spec.sweep.axis, out_dir, spec.id, svg, prefix="accuracy_",
                           ylabel="probability")
    return plot_series(summary, spec.sweep.axis, out_dir, spec.id, svg)
