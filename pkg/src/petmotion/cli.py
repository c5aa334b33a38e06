"""Command-line front end.

Subcommands: ``process-markers``, ``sine``, ``ramp``, ``run`` and ``report``.
Exit codes: 0 success, 1 configuration error, 2 input error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .control import PlantLimits
from .datasets import head_like
from .geometry import DegenerateGeometry, Pose, euler_zyx_array, rotations_from_euler_array
from .sim import (ConfigMismatch, LogFormatError, SimLog, SimulationAborted, compute_metrics,
                  run_closed_loop, run_ramp_test)
from .stewart import NoConvergence, SingularJacobian
from .trajectory import (AXIS_NAMES, DegenerateInput, InvalidConfig, MarkerFileError, format_stats,
                         generate_sine, process_markers, read_markers, read_trajectory,
                         trajectory_stats, write_trajectory)

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

# flag name -> config key; every flag is a shortcut for a config entry
FLAG_KEYS = {
    "duration": "schedule.duration",
    "seed": "noise.seed",
    "k_p": "gains.k_p",
    "robot_delay": "latency.robot_delay",
    "measurement_delay": "latency.measurement_delay",
    "filter_window": "latency.filter_window",
    "frequency": "sine.frequency",
    "amplitude": "sine.amplitude",
    "sine_axis": "sine.axis",
    "speed": "ramp.speed",
    "distance": "ramp.distance",
    "ramp_axis": "ramp.axis",
    "trajectory": "run.trajectory",
}


def _json_clean(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    return obj


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_json_clean(data), indent=2, sort_keys=True) + "\n")


def _output_dir(args, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out = Path(args.runs_root) / f"{command}-{stamp}"
        n = 1
        while out.exists():
            n += 1
            out = Path(args.runs_root) / f"{command}-{stamp}-{n}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([f"--set {item!r}: expected section.key=value"])
        overrides[key.strip()] = value
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return load_config(args.config, overrides)


def _simulate(cfg: RunConfig, traj, out: Path) -> dict:
    geom = cfg.geometry()
    log = run_closed_loop(traj, geom, cfg.rig(geom), cfg.gains(), cfg.schedule(), cfg.latencies(),
                          seed=cfg.seed, noise=cfg.noise(), options=cfg.options())
    (out / "config.ini").write_text(cfg.to_ini())
    log.save(out / "log")
    metrics = compute_metrics(log, cfg["run"]["skip_initial"]).to_dict()
    write_json(out / "metrics.json", metrics)
    return metrics


def _print_metrics(metrics: dict, out: Path) -> None:
    for k in sorted(metrics):
        v = metrics[k]
        print(f"{k:24s} {'n/a' if v is None else f'{v:.6g}'}")
    print(f"output: {out}")


# --- subcommands ------------------------------------------------------------

def cmd_process_markers(args) -> int:
    frames = read_markers(args.input)
    traj = process_markers(frames)
    write_trajectory(args.output, traj)
    print(format_stats(trajectory_stats(traj, args.skip_initial)))
    return EXIT_OK


def cmd_sine(args) -> int:
    cfg = _config(args)
    s = cfg["sine"]
    duration = cfg["schedule"]["duration"]
    traj = generate_sine(s["frequency"], s["amplitude"], s["axis"], duration + 1.0 / cfg["schedule"]["ur3_rate"],
                         rate=cfg["schedule"]["ur3_rate"])
    out = _output_dir(args, "sine")
    _print_metrics(_simulate(cfg, traj, out), out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    path = cfg["run"]["trajectory"]
    traj = read_trajectory(path) if path else head_like()
    out = _output_dir(args, "run")
    _print_metrics(_simulate(cfg, traj, out), out)
    return EXIT_OK


def cmd_ramp(args) -> int:
    cfg = _config(args)
    r = cfg["ramp"]
    p = cfg["plant"]
    limits = PlantLimits(p["ur3_linear_velocity"], p["ur3_angular_velocity"],
                         p["ur3_linear_accel"], p["ur3_angular_accel"])
    res = run_ramp_test(r["speed"], r["distance"], r["axis"], cfg["gains"]["ur3_k_p"],
                        cfg["schedule"]["ur3_rate"], cfg["latency"]["robot_delay"], limits,
                        cfg["schedule"]["encoder_rate"])
    out = _output_dir(args, "ramp")
    (out / "config.ini").write_text(cfg.to_ini())
    data = np.column_stack([res.t, res.desired, res.measured, res.command, res.executed])
    _write_csv(out / "ramp.csv", ["t", "desired", "measured", "command_velocity", "executed_velocity"], data)
    write_json(out / "metrics.json", {"lag": res.lag})
    print(f"lag {res.lag * 1e3:.2f} ms")
    print(f"output: {out}")
    return EXIT_OK


def _write_csv(path: Path, header, data) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.10g")


def _pose_columns(vecs):
    return np.hstack([vecs[:, :3], np.unwrap(vecs[:, 3:], period=360.0, axis=0)])


def plot_data(log: SimLog) -> dict:
    """Per-axis ``(time, reference, tracked, difference)`` arrays for three comparisons.

    ``measurement``: true helmet-in-ring pose against the encoder estimate.
    ``reproduction``: desired head trajectory against the head robot.
    ``compensation``: head robot against the ring robot (carrying the
    helmet at its nominal pose).
    """
    enc = log.encoder
    nominal = Pose.from_vector(log.meta["nominal_pose"])
    ring_r = rotations_from_euler_array(enc["ring"][:, 3:])
    carried = np.hstack([np.einsum("nij,j->ni", ring_r, nominal.translation) + enc["ring"][:, :3],
                         euler_zyx_array(ring_r @ nominal.rotation)])
    ur3 = log.ur3
    head_at_ur3 = np.column_stack([np.interp(ur3["t"], enc["t"], enc["head"][:, c]) for c in range(6)])
    pairs = {
        "measurement": (enc["t"], enc["rel_true"], enc["rel_meas"]),
        # desired is logged for the next head-robot tick; align it with that tick
        "reproduction": (ur3["t"][1:], ur3["desired"][:-1], head_at_ur3[1:]),
        "compensation": (enc["t"], enc["head"], carried),
    }
    out = {}
    for name, (t, ref, trk) in pairs.items():
        ref, trk = _pose_columns(ref), _pose_columns(trk)
        for k, axis in enumerate(AXIS_NAMES):
            out[f"{name}_{axis}"] = np.column_stack([t, ref[:, k], trk[:, k], trk[:, k] - ref[:, k]])
    return out


def cmd_report(args) -> int:
    src = Path(args.log)
    log_dir = src / "log" if (src / "log").is_dir() else src
    log = SimLog.load(log_dir)
    out = Path(args.out) if args.out else src / "report"
    out.mkdir(parents=True, exist_ok=True)
    metrics = compute_metrics(log, args.skip_initial).to_dict()
    write_json(out / "metrics.json", metrics)
    for name, data in plot_data(log).items():
        _write_csv(out / f"{name}.csv", ["time", "reference", "tracked", "difference"], data)
    _print_metrics(metrics, out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="petmotion", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def sim_parent():
        sp = argparse.ArgumentParser(add_help=False)
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config entry (repeatable)")
        sp.add_argument("--out", help="output directory (default: timestamped under --runs-root)")
        sp.add_argument("--runs-root", default="runs")
        sp.add_argument("--duration", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--k-p", dest="k_p", type=float)
        sp.add_argument("--robot-delay", type=float)
        sp.add_argument("--measurement-delay", type=float)
        sp.add_argument("--filter-window", type=int)
        return sp

    q = sub.add_parser("process-markers", help="marker file -> trajectory file + statistics")
    q.add_argument("input")
    q.add_argument("output")
    q.add_argument("--skip-initial", type=float, default=1.0)
    q.set_defaults(func=cmd_process_markers)

    q = sub.add_parser("sine", parents=[sim_parent()], help="closed-loop run on a sine trajectory")
    q.add_argument("--frequency", type=float)
    q.add_argument("--amplitude", type=float)
    q.add_argument("--axis", dest="sine_axis")
    q.set_defaults(func=cmd_sine)

    q = sub.add_parser("ramp", parents=[sim_parent()], help="robot latency from a velocity ramp")
    q.add_argument("--speed", type=float)
    q.add_argument("--distance", type=float)
    q.add_argument("--axis", dest="ramp_axis")
    q.set_defaults(func=cmd_ramp)

    q = sub.add_parser("run", parents=[sim_parent()], help="closed-loop run on a trajectory file")
    q.add_argument("trajectory", nargs="?", help="trajectory file (default: bundled head-like data)")
    q.set_defaults(func=cmd_run)

    q = sub.add_parser("report", help="metrics and plot data from a saved run")
    q.add_argument("log", help="run directory or its log/ subdirectory")
    q.add_argument("--out")
    q.add_argument("--skip-initial", type=float, default=1.0)
    q.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigMismatch, InvalidConfig) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationAborted, NoConvergence, SingularJacobian) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MarkerFileError, LogFormatError, DegenerateInput, DegenerateGeometry,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
