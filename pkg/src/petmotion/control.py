"""Velocity controllers for both robots and the simulated robot plant.

Twists are ``[mm/s, mm/s, mm/s, deg/s, deg/s, deg/s]`` in the world (robot
base) frame.  Pose errors are turned into 6-vectors by stacking the
translation with the rotation vector of the relative rotation in degrees.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .geometry import (Pose, Twist, axis_angle_magnitude, exp_so3, exp_so3_array, orthonormalize,
                       rotvec_deg)

DEG = math.pi / 180.0


@dataclass
class GainConfig:
    """Gains of the coarse-correction (ring-following) controller."""

    k_p: float = 10.0
    delta_t_max: float = 20.0
    delta_r_max: float = 14.0

    def __post_init__(self):
        if self.k_p <= 0 or self.delta_t_max <= 0 or self.delta_r_max <= 0:
            raise ValueError("gains and thresholds must be positive")


def exp_gain(delta: float, delta_max: float) -> float:
    """Feedforward gain in [0, 1]: ``r * exp(r - 1)`` for ``r = delta / delta_max < 1``, else 1."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    r = delta / delta_max
    if r >= 1.0:
        return 1.0
    return r * math.exp(r - 1.0)


class AveragingFilter:
    """Mean of the last ``window`` pushed vectors (fewer at start-up)."""

    def __init__(self, window: int = 30, dim: int = 6):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = int(window)
        self._buf = np.zeros((self.window, dim))
        self._sum = np.zeros(dim)
        self._n = 0
        self._i = 0
        self._pushes = 0

    def push(self, sample) -> np.ndarray:
        sample = np.asarray(sample, dtype=float)
        self._sum += sample - self._buf[self._i]
        self._buf[self._i] = sample
        self._i = (self._i + 1) % self.window
        self._n = min(self._n + 1, self.window)
        self._pushes += 1
        if self._pushes % 1000 == 0:
            # periodic exact resum keeps the running sum from drifting
            self._sum = self._buf.sum(axis=0)
        return self.value

    @property
    def value(self) -> np.ndarray:
        if self._n == 0:
            return np.zeros(self._buf.shape[1])
        return self._sum / self._n

    def __len__(self):
        return self._n


@dataclass
class PoseError:
    """Translation (mm) and relative rotation from a current pose to a target."""

    translational: np.ndarray
    rotational: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.translational, rotvec_deg(self.rotational)])

    @classmethod
    def from_vector(cls, v) -> "PoseError":
        v = np.asarray(v, dtype=float)
        return cls(v[:3].copy(), exp_so3(v[3:6] * DEG))

    @classmethod
    def zero(cls) -> "PoseError":
        return cls(np.zeros(3), np.eye(3))


def pose_error(target: Pose, current: Pose) -> PoseError:
    """Error such that applying it (world frame) to ``current`` yields ``target``."""
    return PoseError(target.translation - current.translation,
                     target.rotation @ current.rotation.T)


def coarse_command(e_x: PoseError, e_xdot: Twist, xdot_m: Twist, gains: GainConfig,
                   filter: AveragingFilter | None = None) -> Twist:
    """Ring-following velocity command.

    ``xc = k_p * e_x + diag(K_T I3, K_R I3) @ (xdot_m + e_xdot)`` with the
    feedforward gains from :func:`exp_gain` on the translational error norm
    and the rotation angle of ``e_x``.  When ``filter`` is given, ``e_xdot``
    is pushed through it first and its current mean is used.
    """
    exdot = e_xdot.to_vector()
    if filter is not None:
        exdot = filter.push(exdot)
    xdot_d = xdot_m.to_vector() + exdot
    k_t = exp_gain(float(np.linalg.norm(e_x.translational)), gains.delta_t_max)
    k_r = exp_gain(axis_angle_magnitude(e_x.rotational), gains.delta_r_max)
    out = gains.k_p * e_x.to_vector()
    out[:3] += k_t * xdot_d[:3]
    out[3:] += k_r * xdot_d[3:]
    return Twist.from_vector(out)


def integrate_pose(pose: Pose, twist_vec, dt: float) -> Pose:
    """Advance ``pose`` by a constant world-frame twist over ``dt``."""
    w = twist_vec[3:6]
    if w[0] == 0.0 and w[1] == 0.0 and w[2] == 0.0:
        rot = pose.rotation
    else:
        rot = exp_so3(np.asarray(w) * (DEG * dt)) @ pose.rotation
    return Pose(rot, pose.translation + np.asarray(twist_vec[:3]) * dt)


def predict_pose(x_m: Pose, xdot_m: Twist, dt: float) -> Pose:
    return integrate_pose(x_m, xdot_m.to_vector(), dt)


def reproduction_command(x_d: Pose, xdot_d: Twist, x_m: Pose, xdot_m: Twist,
                         k_p: float, dt: float) -> Twist:
    """Head-emulation velocity command.

    The robot pose is predicted one step ahead from its measured pose and
    velocity; the command is the desired velocity plus ``k_p`` times the
    error from that prediction to ``x_d``.  Callers pass the desired pose
    for the instant the prediction refers to.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x_hat = predict_pose(x_m, xdot_m, dt)
    e = pose_error(x_d, x_hat).to_vector()
    return Twist.from_vector(xdot_d.to_vector() + k_p * e)


@dataclass
class PlantLimits:
    """Per-axis velocity and acceleration limits (mm, deg, s)."""

    linear_velocity: float = 250.0
    angular_velocity: float = 60.0
    linear_accel: float = 3000.0
    angular_accel: float = 750.0

    def vectors(self):
        v = np.array([self.linear_velocity] * 3 + [self.angular_velocity] * 3)
        a = np.array([self.linear_accel] * 3 + [self.angular_accel] * 3)
        return v, a


class RobotPlant:
    """Cartesian velocity-controlled robot with a pure command delay.

    Each :meth:`step` (one per control period) integrates the executed
    twist up to ``now``, queues the new command, and switches to the newest
    command whose delay has elapsed, slewed by the acceleration limit and
    clamped by the velocity limit.  Delays are rounded up to whole periods.
    """

    def __init__(self, pose: Pose | None = None, control_period: float = 0.008,
                 command_delay: float = 0.016, limits: PlantLimits | None = None,
                 t0: float = 0.0):
        if control_period <= 0 or command_delay < 0:
            raise ValueError("invalid plant timing")
        self.pose = Pose.identity() if pose is None else Pose(pose.rotation.copy(), pose.translation.copy())
        self.control_period = float(control_period)
        self.command_delay = float(command_delay)
        self.delay_periods = int(math.ceil(command_delay / control_period - 1e-9))
        self.limits = limits or PlantLimits()
        self._vmax, self._amax = self.limits.vectors()
        self._twist = np.zeros(6)
        self._target = np.zeros(6)
        self._fifo: deque = deque()
        self._k = 0
        self.t = float(t0)

    @property
    def twist(self) -> Twist:
        return Twist.from_vector(self._twist)

    @property
    def twist_vector(self) -> np.ndarray:
        return self._twist

    def pose_at(self, t: float) -> Pose:
        """Pose at ``t >= self.t`` under the currently executed twist."""
        return integrate_pose(self.pose, self._twist, t - self.t)

    def poses_at(self, times):
        """Batched :meth:`pose_at`: (n, 3, 3) rotations and (n, 3) translations."""
        dt = np.asarray(times, dtype=float) - self.t
        w = self._twist[3:]
        if w[0] == 0.0 and w[1] == 0.0 and w[2] == 0.0:
            rot = np.broadcast_to(self.pose.rotation, (len(dt), 3, 3)).copy()
        else:
            rot = exp_so3_array(np.outer(dt, w * DEG)) @ self.pose.rotation
        return rot, self.pose.translation + np.outer(dt, self._twist[:3])

    def step(self, command: Twist | np.ndarray, now: float) -> None:
        cmd = command.to_vector() if isinstance(command, Twist) else np.asarray(command, dtype=float)
        self.pose = self.pose_at(now)
        if np.abs(self.pose.rotation @ self.pose.rotation.T - np.eye(3)).max() > 1e-12:
            self.pose.rotation = orthonormalize(self.pose.rotation)
        self.t = float(now)
        self._fifo.append((self._k + self.delay_periods, cmd.copy()))
        while self._fifo and self._fifo[0][0] <= self._k:
            self._target = self._fifo.popleft()[1]
        dv = np.clip(self._target - self._twist, -self._amax * self.control_period,
                     self._amax * self.control_period)
        self._twist = np.clip(self._twist + dv, -self._vmax, self._vmax)
        self._k += 1


def plant_step(plant: RobotPlant, command: Twist, now: float) -> RobotPlant:
    plant.step(command, now)
    return plant
