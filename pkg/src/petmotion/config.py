"""Run configuration: a flat INI file with one section per subsystem.

Every key has a default, so an empty file (or no file) is a valid
configuration.  Grammar::

    [section]
    key = value        ; numbers, true/false, or comma-separated lists

Unknown sections or keys are errors, as are out-of-range values; all
problems are collected and reported together.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import GainConfig, PlantLimits
from .geometry import Pose
from .imaging import ImagingRig
from .sim import LatencyConfig, NoiseConfig, RateSchedule, SimOptions
from .stewart import StewartGeometry, canonical_geometry


class ConfigError(ValueError):
    """One or more configuration problems; ``errors`` lists them all."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


# section -> key -> (type, default, check, description)
_POS = (lambda v: v > 0, "must be > 0")
_NONNEG = (lambda v: v >= 0, "must be >= 0")
_ANY = (lambda v: True, "")

SCHEMA = {
    "schedule": {
        "encoder_rate": (float, 1000.0, _POS),
        "ur5_rate": (float, 125.0, _POS),
        "ur3_rate": (float, 60.0, _POS),
        "camera_rate": (float, 30.0, _POS),
        "duration": (float, 30.0, _POS),
    },
    "latency": {
        "measurement_delay": (float, 0.004, _NONNEG),
        "filter_window": (int, 30, (lambda v: v >= 1, "must be >= 1")),
        "robot_delay": (float, 0.016, _NONNEG),
        "ur3_delay": (float, 0.016, _NONNEG),
    },
    "gains": {
        "k_p": (float, 10.0, _POS),
        "delta_t_max": (float, 20.0, _POS),
        "delta_r_max": (float, 14.0, _POS),
        "ur3_k_p": (float, 3.0, _POS),
    },
    "plant": {
        "ur5_linear_velocity": (float, 250.0, _POS),
        "ur5_angular_velocity": (float, 60.0, _POS),
        "ur5_linear_accel": (float, 3000.0, _POS),
        "ur5_angular_accel": (float, 750.0, _POS),
        "ur3_linear_velocity": (float, 500.0, _POS),
        "ur3_angular_velocity": (float, 120.0, _POS),
        "ur3_linear_accel": (float, 5000.0, _POS),
        "ur3_angular_accel": (float, 2000.0, _POS),
        "ur5_enabled": (bool, True, _ANY),
    },
    "noise": {
        "seed": (int, 0, _NONNEG),
        "encoder_quantization": (bool, True, _ANY),
        "pixel_quantization": (bool, True, _ANY),
        "encoder_noise_sd": (float, 0.0, _NONNEG),
        "camera_noise_sd": (float, 0.0, _NONNEG),
    },
    "rig": {
        "enabled": (bool, True, _ANY),
        "screen_distance": (float, 190.0, _POS),
        "pixel_pitch": (float, 0.1, _POS),
        "exposure": (float, 0.015, _POS),
        "half_size": (float, 80.0, _POS),
    },
    "geometry": {
        # 18 comma-separated numbers each (six x,y,z points); empty selects the built-in layout
        "base_points": (list, [], _ANY),
        "platform_points": (list, [], _ANY),
        "nominal_pose": (list, [0.0] * 6, _ANY),
    },
    "run": {
        "trajectory": (str, "", _ANY),
        "skip_initial": (float, 1.0, _NONNEG),
    },
    "sine": {
        "frequency": (float, 2.0, _POS),
        "amplitude": (float, 10.0, _POS),
        "axis": (str, "x", _ANY),
    },
    "ramp": {
        "speed": (float, 80.0, _POS),
        "distance": (float, 200.0, _POS),
        "axis": (str, "x", _ANY),
    },
}

AXES = ("x", "y", "z", "yaw", "pitch", "roll")


def _parse(kind, text: str):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected true/false, got {text!r}")
    if kind is list:
        return [float(x) for x in text.split(",") if x.strip()]
    if kind is int:
        return int(text)
    return kind(text)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    """Validated values for every section of :data:`SCHEMA`."""

    values: dict = field(default_factory=lambda: {s: {k: entry[1] for k, entry in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    # --- builders ---------------------------------------------------------------
    def schedule(self) -> RateSchedule:
        return RateSchedule(**self["schedule"])

    def latencies(self) -> LatencyConfig:
        return LatencyConfig(**self["latency"])

    def gains(self) -> GainConfig:
        g = self["gains"]
        return GainConfig(g["k_p"], g["delta_t_max"], g["delta_r_max"])

    def noise(self) -> NoiseConfig:
        n = self["noise"]
        return NoiseConfig(n["encoder_quantization"], n["pixel_quantization"],
                           n["encoder_noise_sd"], n["camera_noise_sd"])

    def options(self) -> SimOptions:
        p = self["plant"]
        lim = {r: PlantLimits(p[f"{r}_linear_velocity"], p[f"{r}_angular_velocity"],
                              p[f"{r}_linear_accel"], p[f"{r}_angular_accel"]) for r in ("ur5", "ur3")}
        return SimOptions(ur3_kp=self["gains"]["ur3_k_p"], ur5_limits=lim["ur5"], ur3_limits=lim["ur3"],
                          ur5_enabled=p["ur5_enabled"], camera_enabled=self["rig"]["enabled"])

    def geometry(self) -> StewartGeometry:
        g = self["geometry"]
        nominal = Pose.from_vector(g["nominal_pose"])
        if not g["base_points"]:
            canon = canonical_geometry()
            return StewartGeometry(canon.base_points, canon.platform_points, nominal)
        return StewartGeometry(np.reshape(g["base_points"], (6, 3)),
                               np.reshape(g["platform_points"], (6, 3)), nominal)

    def rig(self, geometry: StewartGeometry | None = None) -> ImagingRig:
        r = self["rig"]
        geometry = geometry or self.geometry()
        return ImagingRig.default(r["screen_distance"], geometry.nominal_pose, r["pixel_pitch"],
                                  r["exposure"], r["half_size"])

    @property
    def seed(self) -> int:
        return self["noise"]["seed"]

    # --- text form --------------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, keys in self.values.items():
            cp[section] = {k: _format(v) for k, v in keys.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _validate(values: dict, errors: list) -> None:
    s = values["schedule"]
    if all(s[k] > 0 for k in ("encoder_rate", "ur5_rate", "ur3_rate", "camera_rate")):
        if s["encoder_rate"] < max(s["ur5_rate"], s["ur3_rate"], s["camera_rate"]):
            errors.append("schedule: encoder_rate must be the highest rate")
        for k in ("encoder_rate", "ur5_rate", "ur3_rate"):
            if float(s[k]) != int(s[k]):
                errors.append(f"schedule.{k}: must be a whole number of Hz")
    g = values["geometry"]
    if bool(g["base_points"]) != bool(g["platform_points"]):
        errors.append("geometry: base_points and platform_points must be given together")
    for k in ("base_points", "platform_points"):
        if g[k] and len(g[k]) != 18:
            errors.append(f"geometry.{k}: expected 18 numbers, got {len(g[k])}")
    if len(g["nominal_pose"]) != 6:
        errors.append(f"geometry.nominal_pose: expected 6 numbers, got {len(g['nominal_pose'])}")
    for sec in ("sine", "ramp"):
        if values[sec]["axis"] not in AXES[:3] + (AXES[3:] if sec == "sine" else ()):
            errors.append(f"{sec}.axis: unknown axis {values[sec]['axis']!r}")
    traj = values["run"]["trajectory"]
    if traj and not Path(traj).is_file():
        errors.append(f"run.trajectory: file {traj!r} does not exist")


def load_config(path=None, overrides=None) -> RunConfig:
    """Read ``path`` (optional), apply ``overrides`` and validate.

    ``overrides`` maps ``"section.key"`` to a string or a typed value;
    these win over the file.  Raises :class:`ConfigError` listing every
    problem found.
    """
    cfg = RunConfig()
    errors: list[str] = []
    raw: list[tuple[str, str, object, str]] = []
    if path is not None:
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except FileNotFoundError:
            raise ConfigError([f"config file {str(path)!r} does not exist"]) from None
        except configparser.Error as exc:
            raise ConfigError([f"{path}: {exc}"]) from None
        for section in cp.sections():
            for key, text in cp[section].items():
                raw.append((section, key, text, f"{path} [{section}] {key}"))
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        raw.append((section, key, value, f"override {dotted}"))

    for section, key, value, where in raw:
        if section not in SCHEMA:
            errors.append(f"{where}: unknown section {section!r}")
            continue
        if key not in SCHEMA[section]:
            errors.append(f"{where}: unknown key {key!r}")
            continue
        kind, _, (check, msg) = SCHEMA[section][key]
        try:
            v = _parse(kind, value) if isinstance(value, str) else value
            if kind is float and not isinstance(v, bool):
                v = float(v)
        except (TypeError, ValueError) as exc:
            errors.append(f"{section}.{key}: {exc}")
            continue
        if kind in (float, int) and not np.isfinite(v):
            errors.append(f"{section}.{key}: must be finite")
            continue
        if not check(v):
            errors.append(f"{section}.{key}: {msg} (got {v})")
            continue
        cfg.values[section][key] = v
    _validate(cfg.values, errors)
    if not errors:
        try:
            cfg.geometry()
        except ValueError as exc:
            errors.append(f"geometry: {exc}")
    if errors:
        raise ConfigError(errors)
    return cfg
