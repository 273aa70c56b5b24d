#!/usr/bin/env python3
"""
Lattice Leakage Control - Command-Line Runner

Runs the leakage-suppression experiments from a key=value config file and
writes CSV tables plus a manifest.json into the output directory.

Usage:
    leakctl spectrum   --config run.conf
    leakctl fringe     --config run.conf [--tau-points N] [--calibrate]
    leakctl visibility --config run.conf [--depth-average on|off]
    leakctl sweep      --config run.conf [--threads N]
    leakctl propagate  --config run.conf [--record-stride N]

Common options:
    --out-dir DIR         Output directory (default: output.dir, LEAKCTL_OUTPUT_DIR or ./results)
    --depth-average       on/off; overrides depth.mode (on uses the Gaussian proxy when unset)
    --threads N           Worker threads for independent points (default: LEAKCTL_THREADS or 1)
    --quiet               Only print errors
"""

import argparse
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

import console
from errors import ConfigError, FitError, LeakageControlError
from experiments import (
    FringeScanSpec,
    Simulator,
    SweepSpec,
    calibrate_phase_offset,
    default_tau_values,
    fit_rows,
    run_branching_sweep,
    run_fringe,
    run_visibility_study,
    summarize_sweep,
)
from measurement import branching_ratio
from output_writer import OutputWriter
from run_config import RunConfig, default_output_dir, parse_config
from stationary_states import qubit_splitting


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key=value run configuration file")
    common.add_argument("--out-dir", help="Output directory")
    common.add_argument("--depth-average", choices=["on", "off"], help="Average over the lattice-depth distribution")
    common.add_argument("--threads", type=int, help="Worker threads for independent points")
    common.add_argument("--quiet", action="store_true", help="Only print errors")

    parser = argparse.ArgumentParser(prog="leakctl", description="Leakage suppression in a tilted optical lattice")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="Stationary states of the static lattice")
    fringe = sub.add_parser("fringe", parents=[common], help="P_L fringe vs AM delay")
    fringe.add_argument("--tau-points", type=int, help="Δτ samples over one fringe period")
    fringe.add_argument("--calibrate", action="store_true", help="Quote Δφ relative to a calibrated minimum")
    visibility = sub.add_parser("visibility", parents=[common], help="Fringe visibility vs leakage ratio")
    visibility.add_argument("--tau-points", type=int, help="Δτ samples over one fringe period")
    sub.add_parser("sweep", parents=[common], help="Branching-ratio search over A_PM, A_AM, n")
    propagate = sub.add_parser("propagate", parents=[common], help="Single driven run")
    propagate.add_argument("--record-stride", type=int, help="Record populations every N steps")
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    try:
        return int(os.getenv("LEAKCTL_THREADS", "1"))
    except ValueError:
        raise ConfigError("LEAKCTL_THREADS must be an integer", key="LEAKCTL_THREADS")


def _depths(config: RunConfig, args):
    if args.depth_average == "off":
        return None
    if args.depth_average == "on":
        return config.depth_distribution("gaussian" if config.depth.mode == "single" else config.depth.mode)
    return config.depth_distribution()


def make_simulator(config: RunConfig, threads: int) -> Simulator:
    return Simulator(
        grid=config.grid.build(),
        propagation=config.propagation,
        method=config.basis.method,
        localization_threshold=config.basis.localization_threshold,
        cluster_gap=config.basis.cluster_gap,
        threads=threads,
    )


def cmd_spectrum(config, args, sim, out):
    basis = sim.basis(config.lattice)
    out.write_spectrum(basis)
    console.success(f"qubit splitting {qubit_splitting(basis):.4f} ħω_r, {len(basis)} localized states")
    return {}


def _tau_values(config, args):
    points = getattr(args, "tau_points", None) or config.tau_points
    return default_tau_values(config.drive.omega, points)


def cmd_fringe(config, args, sim, out):
    depths = _depths(config, args)
    calibration = None
    offset = 0.0
    if args.calibrate:
        calibration = calibrate_phase_offset(sim, config.lattice, config.drive,
                                             getattr(args, "tau_points", None) or config.tau_points)
        offset = calibration.phase_offset
    spec = FringeScanSpec(params=config.lattice, depths=depths, sched_base=config.drive,
                          tau_values=_tau_values(config, args))
    rows = run_fringe(spec, sim, phase_offset=offset)
    out.write_fringe(rows)
    try:
        fit = fit_rows(rows, config.drive)
        out.write_fit(fit, calibration=calibration)
        console.success(f"fringe fit: offset {fit.offset:.4e}, amplitude {fit.amplitude:.4e}")
    except FitError as exc:
        console.warning(f"fringe fit skipped: {exc}")
    return {"depth_averaged": depths is not None}


def cmd_visibility(config, args, sim, out):
    depths = _depths(config, args)
    tau_values = _tau_values(config, args)
    specs = [
        FringeScanSpec(params=config.lattice, depths=depths,
                       sched_base=config.drive.with_amplitudes(a_pm=a_pm), tau_values=tau_values)
        for a_pm in config.visibility_a_pm
    ]
    out.write_visibility(run_visibility_study(specs, sim))
    return {"depth_averaged": depths is not None}


def cmd_sweep(config, args, sim, out):
    depths = _depths(config, args)
    spec = SweepSpec(params=config.lattice, depths=depths, omega=config.drive.omega,
                     a_pm=config.sweep_a_pm, a_am=config.sweep_a_am, n=config.sweep_n)
    rows = run_branching_sweep(spec, sim)
    summaries = summarize_sweep(rows)
    out.write_sweep(rows, summaries)
    for s in summaries:
        if s.best_improvement is not None:
            console.info(f"A_PM={s.a_pm:.4f} n={s.n}: best A_AM={s.best_a_am:g}, improvement x{s.best_improvement:.2f}")
    return {"depth_averaged": depths is not None}


def cmd_propagate(config, args, sim, out):
    stride = args.record_stride if args.record_stride is not None else config.propagation.record_stride
    depths = _depths(config, args)
    if depths is not None:
        report = sim.run_averaged(config.lattice, config.drive, depths)
    elif stride:
        report, trace = sim.run_trace(config.lattice, config.drive, stride)
        out.write_trace(trace)
    else:
        report = sim.run_point(config.lattice, config.drive)
    out.write_report(report)
    console.success(f"P_e={report.P_e:.6f} P_L={report.P_L:.6f} B={branching_ratio(report):.4g}")
    return {"depth_averaged": depths is not None}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "fringe": cmd_fringe,
    "visibility": cmd_visibility,
    "sweep": cmd_sweep,
    "propagate": cmd_propagate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    load_dotenv()
    args = build_parser().parse_args(argv)
    console.set_quiet(args.quiet or console.quiet_from_env())

    try:
        config = parse_config(args.config)
        threads = _threads(args)
        out = OutputWriter(args.out_dir or default_output_dir(config))
        sim = make_simulator(config, threads)
        console.print_header(f"leakctl {args.command}")
        extra = COMMANDS[args.command](config, args, sim, out)
        out.write_manifest(args.command, config.model_dump(mode="json"), extra={"cli": {
            "threads": threads,
            "depth_average": args.depth_average,
            "tau_points": getattr(args, "tau_points", None),
            **extra,
        }})
    except (ConfigError, ValidationError) as exc:
        print(console.error_line(exc), file=sys.stderr)
        return 2
    except (LeakageControlError, ValueError, OSError) as exc:
        print(console.error_line(exc), file=sys.stderr)
        return 1

    console.success(f"wrote {', '.join(out.written)} to {out.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
