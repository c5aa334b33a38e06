"""Head trajectories: motion-capture processing and synthetic test signals.

A :class:`Trajectory` holds uniformly sampled 6-vectors ``[x, y, z, yaw,
pitch, roll]`` (mm, deg, intrinsic ZYX) together with the world-frame twist
``[v, w]`` and its time derivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import DegenerateGeometry, Pose, Twist, best_fit_plane, euler_zyx_from_rotation

DEG = math.pi / 180.0
MARKERS = ("leye", "reye", "lear", "rear", "c7")
MARKER_COLUMNS = ["t"] + [f"{m}_{a}" for m in MARKERS for a in "xyz"]
TRAJECTORY_COLUMNS = (["t", "x", "y", "z", "yaw", "pitch", "roll"]
                      + ["vx", "vy", "vz", "wx", "wy", "wz"]
                      + ["ax", "ay", "az", "alpha_x", "alpha_y", "alpha_z"])
AXIS_NAMES = ("x", "y", "z", "yaw", "pitch", "roll")


class DegenerateInput(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class ZeroDirection(DegenerateGeometry):
    pass


class MarkerFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class MarkerFrame:
    t: float
    p_leye: np.ndarray
    p_reye: np.ndarray
    p_lear: np.ndarray
    p_rear: np.ndarray
    p_c7: np.ndarray

    @classmethod
    def from_row(cls, row) -> "MarkerFrame":
        r = np.asarray(row, dtype=float)
        return cls(float(r[0]), *(r[1 + 3 * i:4 + 3 * i].copy() for i in range(5)))

    def to_row(self) -> np.ndarray:
        return np.concatenate([[self.t], self.p_leye, self.p_reye, self.p_lear,
                               self.p_rear, self.p_c7])

    @property
    def head_markers(self) -> np.ndarray:
        return np.vstack([self.p_leye, self.p_reye, self.p_lear, self.p_rear])


@dataclass
class TrajectorySample:
    t: float
    pose: Pose
    twist: Twist
    accel: np.ndarray


@dataclass
class LineFit:
    """Per-coordinate least-squares line ``point + velocity * t``."""

    point: np.ndarray
    velocity: np.ndarray
    residual: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.point + np.multiply.outer(t, self.velocity)


class Trajectory:
    """Uniformly sampled head trajectory.

    Parameters
    ----------
    t : (n,) array
    pose : (n, 6) array of ``[x, y, z, yaw, pitch, roll]``
    twist : (n, 6) array, world-frame ``[v, w]`` (mm/s, deg/s)
    accel : (n, 6) array, time derivative of ``twist``
    """

    def __init__(self, t, pose, twist=None, accel=None):
        self.t = np.asarray(t, dtype=float)
        self.pose = np.asarray(pose, dtype=float).reshape(-1, 6)
        n = len(self.t)
        self.twist = np.zeros((n, 6)) if twist is None else np.asarray(twist, dtype=float).reshape(n, 6)
        self.accel = np.zeros((n, 6)) if accel is None else np.asarray(accel, dtype=float).reshape(n, 6)
        if len(self.pose) != n:
            raise InvalidConfig("pose and time arrays differ in length")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise InvalidConfig("trajectory times must be strictly increasing")
        if not (np.all(np.isfinite(self.pose)) and np.all(np.isfinite(self.twist))
                and np.all(np.isfinite(self.accel))):
            raise InvalidConfig("trajectory contains non-finite values")

    def __len__(self):
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(np.mean(np.diff(self.t))) if len(self.t) > 1 else 0.0

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def pose_at_index(self, i: int) -> Pose:
        return Pose.from_vector(self.pose[i])

    def twist_at_index(self, i: int) -> Twist:
        return Twist.from_vector(self.twist[i])

    def sample(self, i: int) -> TrajectorySample:
        return TrajectorySample(float(self.t[i]), self.pose_at_index(i), self.twist_at_index(i),
                                self.accel[i].copy())

    def samples(self) -> list[TrajectorySample]:
        return [self.sample(i) for i in range(len(self))]

    def resample(self, rate: float) -> "Trajectory":
        """Cubic-spline resampling onto a ``1/rate`` grid starting at ``t[0]``.

        Returns ``self`` when the grid already matches.
        """
        from scipy.interpolate import CubicSpline

        step = 1.0 / rate
        n = int(math.floor(self.duration / step + 1e-9)) + 1
        if len(self) == n and np.allclose(np.diff(self.t), step, rtol=0, atol=1e-8):
            return self
        tn = self.t[0] + step * np.arange(n)
        unwrapped = self.pose.copy()
        unwrapped[:, 3:] = np.unwrap(unwrapped[:, 3:], period=360.0, axis=0)
        out = [CubicSpline(self.t, a, axis=0)(tn) for a in (unwrapped, self.twist, self.accel)]
        return Trajectory(tn, *out)

    def window(self, t_start: float, t_end: float) -> "Trajectory":
        m = (self.t >= t_start - 1e-12) & (self.t <= t_end + 1e-12)
        return Trajectory(self.t[m], self.pose[m], self.twist[m], self.accel[m])


# --- rigid-body construction from markers ---------------------------------

def fit_c7_line(frames) -> LineFit:
    """Ordinary least squares of each C7 coordinate against time."""
    if len(frames) < 2:
        raise DegenerateInput("need at least 2 frames to fit the C7 line")
    t = np.array([f.t for f in frames])
    p = np.vstack([f.p_c7 for f in frames])
    a = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(a, p, rcond=None)
    resid = p - a @ coef
    return LineFit(coef[0], coef[1], float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1)))))


def head_center_translation(frame: MarkerFrame, c7fit: LineFit) -> np.ndarray:
    """Mean of the four head markers minus the fitted C7 position."""
    mean = 0.25 * (frame.p_leye + frame.p_reye + frame.p_lear + frame.p_rear)
    return mean - c7fit(frame.t)


def head_orientation(frame: MarkerFrame) -> np.ndarray:
    """Head rotation ``[r_x, r_y, r_z]`` from the four head markers.

    ``r_z`` is the best-fit plane normal (positive z), ``r_x`` the
    front-minus-back direction with its ``r_z`` component removed, and
    ``r_y = r_z x r_x``.
    """
    r_z = best_fit_plane(frame.head_markers)
    d = (frame.p_leye + frame.p_reye) - (frame.p_lear + frame.p_rear)
    if np.linalg.norm(d) < 1e-9:
        raise ZeroDirection("front and back marker pairs coincide")
    d = d - (d @ r_z) * r_z
    nd = np.linalg.norm(d)
    if nd < 1e-9:
        raise ZeroDirection("front-back direction is parallel to the head plane normal")
    r_x = d / nd
    r_y = np.cross(r_z, r_x)
    return np.column_stack([r_x, r_y, r_z])


def normalize_and_encode(frames) -> Trajectory:
    """Pose 6-vectors relative to the first frame's orientation (no filtering)."""
    if len(frames) < 1:
        raise DegenerateInput("no frames")
    c7 = fit_c7_line(frames) if len(frames) >= 2 else LineFit(frames[0].p_c7, np.zeros(3), 0.0)
    r0t = head_orientation(frames[0]).T
    t = np.array([f.t for f in frames])
    pose = np.empty((len(frames), 6))
    for i, f in enumerate(frames):
        r = r0t @ head_orientation(f)
        e = euler_zyx_from_rotation(r)
        pose[i, :3] = head_center_translation(f, c7)
        pose[i, 3:] = (e.yaw, e.pitch, e.roll)
    pose[:, 3:] = np.unwrap(pose[:, 3:], period=360.0, axis=0)
    return Trajectory(t, pose)


# --- Savitzky-Golay --------------------------------------------------------

def savgol_coefficients(window: int, degree: int, deriv: int = 0, pos: int | None = None) -> np.ndarray:
    """Dot-product weights giving the ``deriv``-th derivative (per sample) at ``pos``."""
    if pos is None:
        pos = window // 2
    x = np.arange(window, dtype=float) - pos
    a = np.vander(x, degree + 1, increasing=True)
    # least-squares solution operator of the polynomial fit
    q, r = np.linalg.qr(a)
    op = np.linalg.solve(r, q.T)
    return math.factorial(deriv) * op[deriv]


def savgol(series, dt: float = 1.0, degree: int = 4, window: int = 17, deriv: int = 0) -> np.ndarray:
    """Savitzky-Golay smoothing/differentiation along axis 0.

    Interior points use the centered convolution; the first and last
    ``window // 2`` points evaluate the polynomial fitted to the first or
    last full window at their own offset.  Derivatives are scaled by
    ``dt ** -deriv``.
    """
    y = np.asarray(series, dtype=float)
    if window % 2 != 1 or window <= degree or deriv < 0 or deriv > degree or dt <= 0:
        raise InvalidConfig("need an odd window > degree, 0 <= deriv <= degree and dt > 0")
    if y.shape[0] < window:
        raise InvalidConfig(f"series of length {y.shape[0]} is shorter than the window ({window})")
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    n, m = y.shape[0], window // 2
    out = np.empty_like(y)
    w = savgol_coefficients(window, degree, deriv)
    view = np.lib.stride_tricks.sliding_window_view(y, window, axis=0)  # (n-w+1, cols, w)
    out[m:n - m] = view @ w
    for i in range(m):
        out[i] = savgol_coefficients(window, degree, deriv, pos=i) @ y[:window]
        out[n - m + i] = savgol_coefficients(window, degree, deriv, pos=m + 1 + i) @ y[n - window:]
    out /= dt ** deriv
    return out[:, 0] if squeeze else out


# --- Euler-rate kinematics -------------------------------------------------

def euler_rates_to_angular(angles, rates, accels=None):
    """World angular velocity (and acceleration) from ZYX angles and their derivatives.

    All inputs are (n, 3) arrays ``[yaw, pitch, roll]`` in deg, deg/s, deg/s^2.
    """
    ang = np.radians(np.atleast_2d(angles))
    rd = np.atleast_2d(rates)
    sy, cy = np.sin(ang[:, 0]), np.cos(ang[:, 0])
    sp, cp = np.sin(ang[:, 1]), np.cos(ang[:, 1])
    yd, pd, rl = rd[:, 0], rd[:, 1], rd[:, 2]
    w = np.column_stack([-sy * pd + cy * cp * rl, cy * pd + sy * cp * rl, yd - sp * rl])
    if accels is None:
        return w
    ad = np.atleast_2d(accels)
    ya, pa, ra = ad[:, 0], ad[:, 1], ad[:, 2]
    # product terms carry deg^2/s^2; one factor of DEG brings them to deg/s^2
    alpha = np.column_stack([
        -sy * pa + cy * cp * ra + DEG * (-cy * yd * pd + (-sy * cp * yd - cy * sp * pd) * rl),
        cy * pa + sy * cp * ra + DEG * (-sy * yd * pd + (cy * cp * yd - sy * sp * pd) * rl),
        ya - sp * ra - DEG * cp * pd * rl,
    ])
    return w, alpha


def angular_to_euler_rates(angles, w, alpha=None):
    """Inverse of :func:`euler_rates_to_angular` (singular at pitch = +-90 deg)."""
    ang = np.radians(np.atleast_2d(angles))
    sy, cy = np.sin(ang[:, 0]), np.cos(ang[:, 0])
    sp, cp = np.sin(ang[:, 1]), np.cos(ang[:, 1])
    e = np.zeros((len(ang), 3, 3))
    e[:, 0, 1], e[:, 0, 2] = -sy, cy * cp
    e[:, 1, 1], e[:, 1, 2] = cy, sy * cp
    e[:, 2, 0], e[:, 2, 2] = 1.0, -sp
    rates = np.linalg.solve(e, np.atleast_2d(w)[..., None])[..., 0]
    if alpha is None:
        return rates
    _, bias = euler_rates_to_angular(np.degrees(ang), rates, np.zeros_like(rates))
    accels = np.linalg.solve(e, (np.atleast_2d(alpha) - bias)[..., None])[..., 0]
    return rates, accels


def _with_derivatives(t, pose, vel6, acc6) -> Trajectory:
    w, alpha = euler_rates_to_angular(pose[:, 3:], vel6[:, 3:], acc6[:, 3:])
    twist = np.hstack([vel6[:, :3], w])
    accel = np.hstack([acc6[:, :3], alpha])
    return Trajectory(t, pose, twist, accel)


def process_markers(frames, degree: int = 4, window: int = 17) -> Trajectory:
    """Full marker pipeline: encode poses, then smooth and differentiate."""
    raw = normalize_and_encode(frames)
    dt = raw.dt
    if dt <= 0:
        raise DegenerateInput("need at least two frames")
    if np.ptp(np.diff(raw.t)) > 1e-2 * dt:
        raise DegenerateInput("marker frames are not uniformly spaced")
    pose = savgol(raw.pose, dt, degree, window, 0)
    vel6 = savgol(raw.pose, dt, degree, window, 1)
    acc6 = savgol(raw.pose, dt, degree, window, 2)
    return _with_derivatives(raw.t, pose, vel6, acc6)


def trajectory_stats(traj: Trajectory, skip_initial: float = 1.0) -> dict:
    """Mean and S.D. of displacement, velocity and acceleration per axis.

    Rotation axes report Euler angle rates, not angular velocity.  Samples before ``t[0] + skip_initial`` are excluded.
    """
    m = traj.t >= traj.t[0] + skip_initial - 1e-12
    rates, accels = angular_to_euler_rates(traj.pose[m, 3:], traj.twist[m, 3:], traj.accel[m, 3:])
    vel = np.hstack([traj.twist[m, :3], rates])
    acc = np.hstack([traj.accel[m, :3], accels])
    out = {}
    for k, name in enumerate(AXIS_NAMES):
        out[name] = {}
        for q, arr in (("displacement", traj.pose[m]), ("velocity", vel), ("acceleration", acc)):
            x = arr[:, k]
            out[name][q] = {"mean": float(np.mean(x)), "sd": float(np.std(x))}
    return out


def format_stats(stats: dict) -> str:
    lines = [f"{'axis':>6} {'displ mean':>11} {'displ sd':>10} {'vel mean':>10} {'vel sd':>10} "
             f"{'acc mean':>10} {'acc sd':>10}"]
    for name, s in stats.items():
        lines.append(f"{name:>6} {s['displacement']['mean']:11.3f} {s['displacement']['sd']:10.3f} "
                     f"{s['velocity']['mean']:10.3f} {s['velocity']['sd']:10.3f} "
                     f"{s['acceleration']['mean']:10.3f} {s['acceleration']['sd']:10.3f}")
    return "\n".join(lines)


# --- synthetic signals -----------------------------------------------------

def _axis_index(axis) -> int:
    if isinstance(axis, str):
        try:
            return AXIS_NAMES.index(axis.lower())
        except ValueError:
            raise InvalidConfig(f"unknown axis {axis!r}") from None
    if not 0 <= int(axis) < 6:
        raise InvalidConfig(f"axis index {axis} out of range")
    return int(axis)


def _time_grid(duration: float, rate: float) -> np.ndarray:
    n = int(math.floor(duration * rate + 1e-9)) + 1
    return np.arange(n) / rate


def generate_sine(freq: float = 2.0, amplitude: float = 10.0, axis="x", duration: float = 30.0,
                  rate: float = 60.0) -> Trajectory:
    """``amplitude * sin(2 pi f t)`` on one axis with analytic derivatives."""
    k = _axis_index(axis)
    if k >= 3 and abs(amplitude) >= 90:
        raise InvalidConfig("rotation amplitude out of range")
    t = _time_grid(duration, rate)
    om = 2 * math.pi * freq
    pose = np.zeros((len(t), 6))
    vel = np.zeros_like(pose)
    acc = np.zeros_like(pose)
    pose[:, k] = amplitude * np.sin(om * t)
    vel[:, k] = amplitude * om * np.cos(om * t)
    acc[:, k] = -amplitude * om * om * np.sin(om * t)
    return _with_derivatives(t, pose, vel, acc)


def generate_ramp(speed: float = 80.0, distance: float = 200.0, axis="x", rate: float = 60.0,
                  duration: float | None = None) -> Trajectory:
    """Constant-speed ramp to ``distance`` then hold (no blending)."""
    if speed <= 0 or distance <= 0:
        raise InvalidConfig("speed and distance must be positive")
    k = _axis_index(axis)
    t_move = distance / speed
    if duration is None:
        duration = t_move + 1.5
    t = _time_grid(duration, rate)
    pose = np.zeros((len(t), 6))
    vel = np.zeros_like(pose)
    pose[:, k] = np.minimum(speed * t, distance)
    vel[:, k] = np.where(t < t_move, speed, 0.0)
    return _with_derivatives(t, pose, vel, np.zeros_like(pose))


def zero_trajectory(duration: float = 10.0, rate: float = 60.0) -> Trajectory:
    t = _time_grid(duration, rate)
    return Trajectory(t, np.zeros((len(t), 6)))


# Reference envelope of recorded locomotion head motion: per-axis mean
# displacement and S.D. of velocity and acceleration, ordered
# x, y, z (mm) then rotations about z, y, x (deg).
# Per axis: displacement mean and S.D., velocity S.D., acceleration S.D. of a
# recorded walking-in-place head trajectory (mm, mm/s, mm/s^2; deg for angles).
HEAD_ENVELOPE = {
    "x": (-15.0, 20.2, 141.0, 815.0),
    "y": (-6.14, 32.4, 69.5, 439.0),
    "z": (16.6, 8.33, 78.3, 767.0),
    "yaw": (0.53, 1.62, 8.52, 103.0),
    "pitch": (-1.31, 1.71, 10.57, 138.0),
    "roll": (1.78, 2.76, 13.1, 116.0),
}
HEAD_FREQUENCIES = (0.2, 0.9, 1.8, 2.7)


def head_like_trajectory(duration: float = 30.0, rate: float = 60.0,
                         frequencies=HEAD_FREQUENCIES, envelope: dict | None = None) -> Trajectory:
    """Deterministic gait-like head motion matching a statistics envelope.

    Each axis is a sum of sinusoids at ``frequencies`` (slow sway, stride,
    step and a harmonic).  Their powers are the non-negative least-squares
    fit to the envelope's velocity and acceleration variances, with the
    displacement variance as a weakly weighted third target: a recorded
    envelope need not satisfy ``sd_v**2 <= sd_x * sd_a`` as any stationary
    signal must, so it cannot always be met exactly.
    """
    from scipy.optimize import nnls

    env = HEAD_ENVELOPE if envelope is None else envelope
    om = 2 * math.pi * np.asarray(frequencies, dtype=float)
    t = _time_grid(duration, rate)
    pose = np.zeros((len(t), 6))
    vel = np.zeros_like(pose)
    acc = np.zeros_like(pose)
    weights = np.array([0.05, 1.0, 1.0])
    for k, name in enumerate(AXIS_NAMES):
        mean, sx, sv, sa = env[name]
        target = np.array([sx, sv, sa], dtype=float) ** 2
        moments = np.array([om ** 0, om ** 2, om ** 4])
        power, _ = nnls(moments / target[:, None] * weights[:, None], weights)
        amps = np.sqrt(2.0 * power)
        # fixed, distinct phases per axis and component keep the axes decorrelated
        phases = (1.3 * k + 2.1 * np.arange(len(om))) % (2 * math.pi)
        for amp, w, ph in zip(amps, om, phases):
            pose[:, k] += amp * np.sin(w * t + ph)
            vel[:, k] += amp * w * np.cos(w * t + ph)
            acc[:, k] -= amp * w * w * np.sin(w * t + ph)
        pose[:, k] += mean
    return _with_derivatives(t, pose, vel, acc)


# Head-frame marker layout (mm): eyes in front, ears behind, centered on the head origin.
HEAD_MARKER_LAYOUT = np.array([[90.0, 60.0, 0.0], [90.0, -60.0, 0.0],
                               [-90.0, 60.0, 0.0], [-90.0, -60.0, 0.0]])


def synthesize_markers(traj: Trajectory, walking_velocity=(1200.0, 0.0, 0.0),
                       c7_offset=(-60.0, 0.0, -150.0), layout=HEAD_MARKER_LAYOUT) -> list[MarkerFrame]:
    """Marker frames for a subject walking overground while the head follows ``traj``.

    The C7 marker moves on a straight line; the head center is that line plus
    the trajectory translation.
    """
    v = np.asarray(walking_velocity, dtype=float)
    frames = []
    for i, ti in enumerate(traj.t):
        line = v * ti
        p = Pose.from_vector(traj.pose[i])
        head = layout @ p.rotation.T + p.translation + line
        frames.append(MarkerFrame(float(ti), head[0], head[1], head[2], head[3],
                                  line + np.asarray(c7_offset, dtype=float)))
    return frames


# --- file formats ------------------------------------------------------------

def _read_table(path, columns, error_cls):
    path = Path(path)
    rows = []
    with path.open() as fh:
        header = fh.readline()
        if not header:
            raise error_cls("empty file", 1)
        names = [h.strip() for h in header.strip().lstrip("#").split(",")]
        if names != columns:
            raise error_cls(f"unexpected header, expected {','.join(columns)}", 1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise error_cls(f"expected {len(columns)} fields, got {len(parts)}", lineno)
            try:
                vals = [float(x) for x in parts]
            except ValueError as exc:
                raise error_cls(str(exc), lineno) from None
            if not all(math.isfinite(x) for x in vals):
                raise error_cls("non-finite value (missing marker samples are not interpolated)", lineno)
            rows.append(vals)
    if not rows:
        raise error_cls("no data rows", 2)
    return np.array(rows)


def read_markers(path) -> list[MarkerFrame]:
    """Read a marker file: header ``t,leye_x,...,c7_z`` then one frame per row."""
    data = _read_table(path, MARKER_COLUMNS, MarkerFileError)
    if len(data) > 1 and np.any(np.diff(data[:, 0]) <= 0):
        bad = int(np.argmax(np.diff(data[:, 0]) <= 0)) + 3
        raise MarkerFileError("time stamps not strictly increasing", bad)
    return [MarkerFrame.from_row(r) for r in data]


def write_markers(path, frames) -> None:
    rows = np.vstack([f.to_row() for f in frames])
    np.savetxt(path, rows, delimiter=",", header=",".join(MARKER_COLUMNS), comments="", fmt="%.6f")


def read_trajectory(path) -> Trajectory:
    data = _read_table(path, TRAJECTORY_COLUMNS, MarkerFileError)
    return Trajectory(data[:, 0], data[:, 1:7], data[:, 7:13], data[:, 13:19])


def write_trajectory(path, traj: Trajectory) -> None:
    rows = np.column_stack([traj.t, traj.pose, traj.twist, traj.accel])
    np.savetxt(path, rows, delimiter=",", header=",".join(TRAJECTORY_COLUMNS), comments="",
               fmt="%.12g")
