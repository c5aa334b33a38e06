"""Rigid-body math shared by the rest of the package.

Units are fixed everywhere: millimeters, degrees, seconds.  Rotations are
stored as 3x3 matrices; Euler ZYX angles are only an input/output format.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

ORTHO_TOL = 1e-9
GIMBAL_TOL_DEG = 1e-6


class DegenerateGeometry(ValueError):
    """Raised when a geometric construction has no unique answer."""


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    return a


@dataclass(slots=True)
class Pose:
    """Rigid transform: ``x -> rotation @ x + translation`` (translation in mm)."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, x, y=None, z=None) -> "Pose":
        t = _vec(x) if y is None else np.array([x, y, z], dtype=float)
        return cls(np.eye(3), t)

    @classmethod
    def from_vector(cls, vec6) -> "Pose":
        """Build from ``[x, y, z, yaw, pitch, roll]`` (mm, deg, intrinsic ZYX)."""
        v = np.asarray(vec6, dtype=float)
        return cls(rotation_from_euler_zyx(EulerZYX(v[3], v[4], v[5])), v[:3].copy())

    def to_vector(self) -> np.ndarray:
        e = euler_zyx_from_rotation(self.rotation)
        return np.array([*self.translation, e.yaw, e.pitch, e.roll])

    def apply(self, points) -> np.ndarray:
        """Map point(s) of shape (3,) or (n, 3) through the transform."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)


@dataclass(slots=True)
class Twist:
    """Linear (mm/s) and angular (deg/s) velocity."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vec6) -> "Twist":
        v = np.asarray(vec6, dtype=float)
        return cls(v[:3].copy(), v[3:6].copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(slots=True)
class EulerZYX:
    """Intrinsic Z-Y-X angles in degrees: ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.

    ``gimbal_lock`` is set when ``|pitch|`` is within 1e-6 deg of 90; the
    yaw/roll split is then a convention and roll is reported as 0.
    """

    yaw: float
    pitch: float
    roll: float
    gimbal_lock: bool = False


def compose(a: Pose, b: Pose) -> Pose:
    """Return the transform that applies ``b`` first, then ``a``."""
    r = a.rotation @ b.rotation
    if np.abs(r @ r.T - np.eye(3)).max() > ORTHO_TOL:
        r = orthonormalize(r)
    return Pose(r, a.rotation @ b.translation + a.translation)


def inverse(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rt.copy(), -(rt @ p.translation))


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(r)
    q = u @ vt
    if np.linalg.det(q) < 0:
        u[:, -1] *= -1
        q = u @ vt
    return q


def cross(a, b) -> np.ndarray:
    """Cross product over the last axis; much cheaper than ``np.cross`` for small arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


_I3 = np.eye(3)
_I3.flags.writeable = False


def skew(w) -> np.ndarray:
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_so3(rotvec_rad) -> np.ndarray:
    """Rodrigues formula; ``rotvec_rad`` is axis * angle in radians."""
    x, y, z = (float(c) for c in rotvec_rad)
    th2 = x * x + y * y + z * z
    if th2 < 1e-16:
        # second-order series keeps the result orthonormal to ~1e-16 here
        a, b = 1.0, 0.5
    else:
        th = math.sqrt(th2)
        a, b = math.sin(th) / th, (1.0 - math.cos(th)) / th2
    # I + a K + b K^2 written out
    return np.array([
        [1.0 - b * (y * y + z * z), b * x * y - a * z, b * x * z + a * y],
        [b * x * y + a * z, 1.0 - b * (x * x + z * z), b * y * z - a * x],
        [b * x * z - a * y, b * y * z + a * x, 1.0 - b * (x * x + y * y)],
    ])


def log_so3(r: np.ndarray) -> np.ndarray:
    """Rotation vector (radians) of a rotation matrix, angle in [0, pi]."""
    c = np.clip((np.trace(r) - 1.0) * 0.5, -1.0, 1.0)
    th = float(np.arccos(c))
    v = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if th < 1e-6:
        return 0.5 * v
    if np.pi - th < 1e-6:
        # near pi the antisymmetric part vanishes; use the symmetric part
        b = 0.5 * (r + np.eye(3))
        i = int(np.argmax(np.diag(b)))
        axis = b[:, i] / np.sqrt(b[i, i])
        if axis @ v < 0:
            axis = -axis
        return th * axis / np.linalg.norm(axis)
    return (th / (2.0 * np.sin(th))) * v


def rotvec_deg(r: np.ndarray) -> np.ndarray:
    return np.degrees(log_so3(r))


def rotation_from_rotvec_deg(v) -> np.ndarray:
    return exp_so3(np.radians(np.asarray(v, dtype=float)))


def rotation_from_axis_angle(axis, angle_deg: float) -> np.ndarray:
    a = _vec(axis)
    a = a / np.linalg.norm(a)
    return exp_so3(np.radians(angle_deg) * a)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_from_euler_zyx(e: EulerZYX) -> np.ndarray:
    return _rz(np.radians(e.yaw)) @ _ry(np.radians(e.pitch)) @ _rx(np.radians(e.roll))


def _wrap180(a: float) -> float:
    # atan2 may return exactly -180; the documented range is (-180, 180]
    return 180.0 if a <= -180.0 else a


def euler_zyx_from_rotation(r: np.ndarray) -> EulerZYX:
    s = float(np.clip(-r[2, 0], -1.0, 1.0))
    # cos(pitch) from the first column is better conditioned than acos/asin near +-90
    c = float(np.hypot(r[0, 0], r[1, 0]))
    pitch = np.degrees(np.arctan2(s, c))
    if 90.0 - abs(pitch) < GIMBAL_TOL_DEG:
        yaw = np.degrees(np.arctan2(-r[0, 1], r[1, 1]))
        return EulerZYX(_wrap180(float(yaw)), float(np.copysign(90.0, pitch)), 0.0, True)
    yaw = np.degrees(np.arctan2(r[1, 0], r[0, 0]))
    roll = np.degrees(np.arctan2(r[2, 1], r[2, 2]))
    return EulerZYX(_wrap180(float(yaw)), float(pitch), _wrap180(float(roll)))


def axis_angle_magnitude(r: np.ndarray) -> float:
    """Rotation angle in degrees, ``acos((trace - 1) / 2)`` clamped to [0, 180]."""
    c = np.clip((np.trace(r) - 1.0) * 0.5, -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def best_fit_plane(points) -> np.ndarray:
    """Unit normal of the least-squares plane through ``points`` (n >= 3).

    The normal is the right singular vector of the centered point matrix
    with the smallest singular value, signed to have a positive z-component.

    Raises
    ------
    DegenerateGeometry
        If the two smallest singular values agree within 1e-9, e.g. for
        collinear points.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 3:
        raise DegenerateGeometry("need at least 3 points of dimension 3")
    q = p - p.mean(axis=0)
    _, s, vt = np.linalg.svd(q)
    if s[1] - s[2] <= 1e-9:
        raise DegenerateGeometry("plane normal is not unique (points collinear or coincident)")
    n = vt[2] / np.linalg.norm(vt[2])
    if n[2] < 0 or (n[2] == 0 and n[np.argmax(np.abs(n))] < 0):
        n = -n
    return n


def euler_zyx_array(rotations) -> np.ndarray:
    """(n, 3) ``[yaw, pitch, roll]`` in degrees for (n, 3, 3) rotations, without gimbal handling."""
    r = np.asarray(rotations, dtype=float)
    pitch = np.degrees(np.arctan2(-r[:, 2, 0], np.hypot(r[:, 0, 0], r[:, 1, 0])))
    yaw = np.degrees(np.arctan2(r[:, 1, 0], r[:, 0, 0]))
    roll = np.degrees(np.arctan2(r[:, 2, 1], r[:, 2, 2]))
    return np.column_stack([yaw, pitch, roll])


def rotations_from_euler_array(angles) -> np.ndarray:
    """(n, 3, 3) rotations from (n, 3) ``[yaw, pitch, roll]`` in degrees."""
    a = np.radians(np.asarray(angles, dtype=float).reshape(-1, 3))
    cy, sy = np.cos(a[:, 0]), np.sin(a[:, 0])
    cp, sp = np.cos(a[:, 1]), np.sin(a[:, 1])
    cr, sr = np.cos(a[:, 2]), np.sin(a[:, 2])
    out = np.empty((len(a), 3, 3))
    out[:, 0, 0] = cy * cp
    out[:, 0, 1] = cy * sp * sr - sy * cr
    out[:, 0, 2] = cy * sp * cr + sy * sr
    out[:, 1, 0] = sy * cp
    out[:, 1, 1] = sy * sp * sr + cy * cr
    out[:, 1, 2] = sy * sp * cr - cy * sr
    out[:, 2, 0] = -sp
    out[:, 2, 1] = cp * sr
    out[:, 2, 2] = cp * cr
    return out


def rotation_angles_array(rotations) -> np.ndarray:
    """Axis-angle magnitudes (deg) of (n, 3, 3) rotations."""
    r = np.asarray(rotations, dtype=float)
    c = np.clip((np.trace(r, axis1=1, axis2=2) - 1.0) * 0.5, -1.0, 1.0)
    return np.degrees(np.arccos(c))


def exp_so3_array(rotvecs_rad) -> np.ndarray:
    """(n, 3, 3) rotations from (n, 3) rotation vectors in radians."""
    w = np.asarray(rotvecs_rad, dtype=float).reshape(-1, 3)
    x, y, z = w[:, 0], w[:, 1], w[:, 2]
    th2 = x * x + y * y + z * z
    small = th2 < 1e-16
    th = np.sqrt(np.where(small, 1.0, th2))
    a = np.where(small, 1.0, np.sin(th) / th)
    b = np.where(small, 0.5, (1.0 - np.cos(th)) / np.where(small, 1.0, th2))
    out = np.empty((len(w), 3, 3))
    out[:, 0, 0] = 1.0 - b * (y * y + z * z)
    out[:, 0, 1] = b * x * y - a * z
    out[:, 0, 2] = b * x * z + a * y
    out[:, 1, 0] = b * x * y + a * z
    out[:, 1, 1] = 1.0 - b * (x * x + z * z)
    out[:, 1, 2] = b * y * z - a * x
    out[:, 2, 0] = b * x * z - a * y
    out[:, 2, 1] = b * y * z + a * x
    out[:, 2, 2] = 1.0 - b * (x * x + y * y)
    return out


def log_so3_array(rotations) -> np.ndarray:
    """(n, 3) rotation vectors (radians) of (n, 3, 3) rotations."""
    r = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    c = np.clip((np.trace(r, axis1=1, axis2=2) - 1.0) * 0.5, -1.0, 1.0)
    th = np.arccos(c)
    v = np.stack([r[:, 2, 1] - r[:, 1, 2], r[:, 0, 2] - r[:, 2, 0], r[:, 1, 0] - r[:, 0, 1]], axis=1)
    small = th < 1e-6
    scale = np.where(small, 0.5, th / (2.0 * np.sin(np.where(small, 1.0, th))))
    out = scale[:, None] * v
    for i in np.flatnonzero(np.pi - th < 1e-6):
        out[i] = log_so3(r[i])
    return out
