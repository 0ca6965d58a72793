"""Command line entry point: ``beamzoom <command> ...``.

Exit codes: 0 success, 1 invalid input (bad arguments, scenario or
infeasible geometry), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .analysis import dpp_feasible, quantization_bound, t_min
from .beamform import FeasibilityError, delay_table, split_free_beamformer, zoom_beamformer
from .channel import los_channels
from .plotting import render
from .runner import output_dir, run_scenario
from .scenario import PRESETS, ScenarioError, load_preset, load_scenario, loads_scenario
from .syscfg import ConfigError, SystemConfig, build_frequency_grid
from .tracking import track_beam_zoom, track_typical

log = logging.getLogger("beamzoom")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _system_args(p, M=128):
    g = p.add_argument_group("system")
    g.add_argument("--N", type=int, default=256, help="BS antennas")
    g.add_argument("--M", type=int, default=M, help="subcarriers")
    g.add_argument("--K-d", dest="K_d", type=int, default=16, help="time-delayers per RF chain")
    g.add_argument("--fc", type=float, default=100e9, help="carrier frequency in Hz")
    g.add_argument("--B", type=float, default=10e9, help="bandwidth in Hz")


def _cfg(args, **extra) -> SystemConfig:
    return SystemConfig(N=args.N, M=args.M, K_d=args.K_d, f_c=args.fc, B=args.B, **extra)


def _common(p):
    p.add_argument("--out", help="output directory (default: $BEAMZOOM_OUT/<id> or out/<id>)")
    p.add_argument("--seed", type=int, help="override the scenario seed (unsigned 64-bit)")
    p.add_argument("--svg", action="store_true", help="also write SVG figures")
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--timing", action="store_true", help="fill elapsed_ms (makes output non-reproducible)")
    p.add_argument("--no-plot", action="store_true", help="skip figures")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beamzoom", description="Wideband THz beam tracking with delay-phase beamforming.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("tmin", help="minimum training overhead for a tracking range")
    p.add_argument("--preset", choices=PRESETS, help="take system and alpha_max from a preset")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--theta", type=float, help="check one tracking center instead of all directions")
    p.add_argument("--orientation", choices=("auto", "ascending"), default="auto")
    _system_args(p)

    p = sub.add_parser("pattern", help="gain pattern of one zoomed beam fan")
    p.add_argument("--theta", type=float, default=-0.025)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--step", type=float, default=1e-4)
    _system_args(p, M=32)
    _common(p)

    p = sub.add_parser("track", help="one tracking round for users at given directions")
    p.add_argument("--theta-prev", type=float, nargs="+", default=[0.0])
    p.add_argument("--theta", type=float, nargs="+", help="true directions (default: theta-prev)")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--tracker", choices=("zoom", "typical"), default="zoom")
    p.add_argument("--rediscover", action="store_true",
                   help="search the whole angular range (theta-prev=0, alpha=1)")
    p.add_argument("--seed", type=int, default=0)
    _system_args(p)

    p = sub.add_parser("delays", help="print the phase-shifter/delay table of a beamformer")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--alpha", type=float, help="zoom half-range (omit for a split-free beam)")
    _system_args(p)

    p = sub.add_parser("sweep", help="run a scenario file")
    p.add_argument("scenario")
    _common(p)

    p = sub.add_parser("fig", help="run a bundled figure preset")
    p.add_argument("id", help=f"one of {', '.join(PRESETS)}")
    _common(p)
    return parser


def cmd_tmin(args):
    if args.preset:
        spec = load_preset(args.preset)
        cfg, alpha = spec.system, spec.alpha_max
    else:
        cfg, alpha = _cfg(args), args.alpha
    grid = build_frequency_grid(cfg)
    ok, margin = dpp_feasible(cfg, grid)
    report = t_min(cfg, grid, alpha, orientation=args.orientation, theta=args.theta)
    print(f"T_min = {report.T_min}")
    t, m, th = report.binding_constraint
    print(f"binding constraint: t={t}, m={m}, theta={th:+g}; orientation={report.orientation}")
    print(f"P = {cfg.P}, DPP margin = {margin:.4f}, quantization step at T_min = "
          f"{quantization_bound(alpha, report.T_min, grid):.4g}")
    return 0


def cmd_pattern(args):
    doc = f"""
schema: 1
id: pattern
kind: pattern
system: {{N: {args.N}, M: {args.M}, K_d: {args.K_d}, f_c: {args.fc!r}, B: {args.B!r}}}
users: [{{theta0: {args.theta!r}, alpha: {args.alpha!r}}}]
sweep: {{axis: frames, values: [1]}}
pattern: {{step: {args.step!r}}}
"""
    spec = loads_scenario(doc, "pattern arguments")
    return _run(spec, args)


def cmd_track(args):
    theta_prev = np.array(args.theta_prev, float)
    alpha = args.alpha
    if args.rediscover:
        theta_prev, alpha = np.zeros_like(theta_prev), 1.0
    theta = np.array(args.theta if args.theta else args.theta_prev, float)
    if theta.shape != theta_prev.shape:
        raise ConfigError("--theta and --theta-prev need the same number of users")
    cfg = _cfg(args, K=theta.size, seed=args.seed).with_snr_db(args.snr)
    grid = build_frequency_grid(cfg)
    if args.tracker == "zoom":
        for th in theta_prev:
            need = t_min(cfg, grid, alpha, theta=th).T_min
            if args.T < need:
                raise FeasibilityError(f"T={args.T} too small for alpha={alpha} at theta={th:+g}; need T >= {need}")
    H = los_channels(grid, theta, cfg.N)
    rng = np.random.default_rng(args.seed)
    tracker = track_beam_zoom if args.tracker == "zoom" else track_typical
    res = tracker(cfg, grid, H, theta_prev, alpha, args.T, rng)
    print("user,theta_prev,theta,theta_hat,error,slot,subcarrier,out_of_range_risk")
    for k in range(theta.size):
        t, m = res.winners[k]
        print(f"{k + 1},{theta_prev[k]:.6g},{theta[k]:.6g},{res.theta_hat[k]:.6g},"
              f"{abs(res.theta_hat[k] - theta[k]):.3g},{t + 1},{m + 1},{int(res.out_of_range_risk[k])}")
    return 0


def cmd_delays(args):
    cfg = _cfg(args)
    grid = build_frequency_grid(cfg)
    bf = zoom_beamformer(args.theta, args.alpha, cfg, grid) if args.alpha else split_free_beamformer(args.theta, cfg, grid)
    sys.stdout.write(delay_table(bf))
    return 0


def _run(spec, args):
    if args.seed is not None:
        spec = spec.replace(seed=args.seed, system=spec.system.replace(seed=args.seed))
    if getattr(args, "trials", None):
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        spec = spec.replace(trials=args.trials)
    out = output_dir(spec, args.out)
    rows, summary = run_scenario(spec, out=out, jobs=args.jobs, timing=args.timing)
    if not args.no_plot:
        for path in render(spec, rows, summary, out, svg=args.svg):
            log.info("wrote %s", path)
    if spec.kind == "pattern":
        pred = [float(b["predicted"]) for b in summary]
        print(f"{len(summary)} beams spanning [{min(pred):.6g}, {max(pred):.6g}]; tables in {out}")
    else:
        print(f"{spec.id}: {len(rows)} rows written to {out}")
        for rec in summary[:12]:
            print("  " + ", ".join(f"{k}={v}" for k, v in rec.items()))
        if len(summary) > 12:
            print(f"  ... {len(summary) - 12} more in summary.csv")
    return 0


def cmd_sweep(args):
    return _run(load_scenario(args.scenario), args)


def cmd_fig(args):
    if args.id not in PRESETS:
        raise ScenarioError(f"unknown figure {args.id!r}; choose from {', '.join(PRESETS)}")
    return _run(load_preset(args.id), args)


COMMANDS = {"tmin": cmd_tmin, "pattern": cmd_pattern, "track": cmd_track, "delays": cmd_delays,
            "sweep": cmd_sweep, "fig": cmd_fig}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
