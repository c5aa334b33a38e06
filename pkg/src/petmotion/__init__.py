"""Head-motion measurement and compensation for a wearable PET scanner.

Modules: :mod:`~petmotion.geometry` (rigid-body math),
:mod:`~petmotion.stewart` and :mod:`~petmotion.encoder` (string-encoder
measurement), :mod:`~petmotion.control` (robot controllers and plant),
:mod:`~petmotion.trajectory` (marker processing and test signals),
:mod:`~petmotion.imaging` (laser/camera fine correction),
:mod:`~petmotion.sim` (closed-loop harness and metrics) and
:mod:`~petmotion.cli`.
"""
from .control import GainConfig, PlantLimits, RobotPlant, coarse_command, exp_gain, reproduction_command
from .geometry import EulerZYX, Pose, Twist, compose, inverse
from .imaging import ImagingRig, reconstruct_source
from .sim import (LatencyConfig, NoiseConfig, RateSchedule, SimLog, SimOptions, compute_metrics,
                  estimate_lag, run_closed_loop)
from .stewart import StewartGeometry, canonical_geometry, forward_kinematics, inverse_kinematics
from .trajectory import Trajectory, head_like_trajectory, process_markers

__version__ = "0.1.0"

__all__ = [
    "EulerZYX", "GainConfig", "ImagingRig", "LatencyConfig", "NoiseConfig", "PlantLimits", "Pose",
    "RateSchedule", "RobotPlant", "SimLog", "SimOptions", "StewartGeometry", "Trajectory", "Twist",
    "canonical_geometry", "coarse_command", "compose", "compute_metrics", "estimate_lag", "exp_gain",
    "forward_kinematics", "head_like_trajectory", "inverse", "inverse_kinematics", "process_markers",
    "reconstruct_source", "reproduction_command", "run_closed_loop",
]
