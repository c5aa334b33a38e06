"""Laser/camera stand-in for the PET detector and fine motion correction.

Four lasers leave a point source on the helmet along +x, +y, -x, -y of the
helmet frame.  Each hits a flat screen fixed to the imaging ring, watched
by a camera.  Screen coordinates are millimeters in the screen plane,
``(0, 0)`` at the nominal hit point, first axis tangential (ring z cross
screen normal) and second axis along the remaining in-plane direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose


class RayMiss(ValueError):
    pass


class ParallelLines(ValueError):
    pass


@dataclass
class ImagingRig:
    laser_dirs: np.ndarray
    source: np.ndarray
    screen_origins: np.ndarray
    screen_normals: np.ndarray
    screen_u: np.ndarray
    screen_v: np.ndarray
    pixel_pitch: float = 0.1
    exposure: float = 0.015
    half_size: float = 80.0

    @classmethod
    def default(cls, screen_distance: float = 190.0, nominal_pose: Pose | None = None,
                pixel_pitch: float = 0.1, exposure: float = 0.015, half_size: float = 80.0,
                source=(0.0, 0.0, 0.0)) -> "ImagingRig":
        """Lasers 90 deg apart in the helmet plane, screens ``screen_distance`` out.

        Screens are placed square to the lasers at the nominal pose.
        """
        if pixel_pitch <= 0 or exposure <= 0 or screen_distance <= 0:
            raise ValueError("pixel pitch, exposure and screen distance must be positive")
        nominal_pose = nominal_pose or Pose.identity()
        dirs = np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 0], [0, -1.0, 0]])
        src = np.asarray(source, dtype=float)
        n = dirs @ nominal_pose.rotation.T
        origins = nominal_pose.apply(src) + screen_distance * n
        u = np.cross([0.0, 0.0, 1.0], n)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        v = np.cross(n, u)
        return cls(dirs, src, origins, n, u, v, pixel_pitch, exposure, half_size)


@dataclass
class CameraObservation:
    t: float
    coords: np.ndarray
    smear_extent: np.ndarray = field(default_factory=lambda: np.zeros((4, 2, 2)))
    direction_change: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=bool))


@dataclass
class ReconResult:
    p: np.ndarray
    gap: float
    residual_after_correction: float = float("nan")


def project_lasers(relative_pose: Pose, rig: ImagingRig) -> np.ndarray:
    """Exact (4, 2) screen coordinates of the laser dots for a helmet pose in the ring frame."""
    o = relative_pose.apply(rig.source)
    d = rig.laser_dirs @ relative_pose.rotation.T
    denom = np.einsum("ij,ij->i", d, rig.screen_normals)
    if np.any(denom <= 1e-9):
        raise RayMiss("a laser is parallel to or pointing away from its screen")
    s = np.einsum("ij,ij->i", rig.screen_origins - o, rig.screen_normals) / denom
    if np.any(s <= 0):
        raise RayMiss("a screen lies behind its laser")
    rel = o + s[:, None] * d - rig.screen_origins
    xy = np.column_stack([np.einsum("ij,ij->i", rel, rig.screen_u),
                          np.einsum("ij,ij->i", rel, rig.screen_v)])
    if np.any(np.abs(xy) > rig.half_size):
        raise RayMiss("a laser dot falls outside its screen")
    return xy


def camera_observe(times, coords, rig: ImagingRig, *, quantize: bool = True,
                   noise_sd: float = 0.0, rng: np.random.Generator | None = None) -> CameraObservation:
    """Camera reading at the end of an exposure window.

    ``coords`` is a (k, 4, 2) array of exact dot positions sampled over the
    window ending at ``times[-1]``.  The reported position is the last one,
    optionally blurred by Gaussian noise, then rounded to the pixel pitch.
    The trail extent and a per-screen flag for non-monotone motion within
    the window are kept for diagnostics.
    """
    c = np.asarray(coords, dtype=float).reshape(-1, 4, 2)
    end = c[-1].copy()
    if noise_sd > 0:
        end += (rng or np.random.default_rng()).normal(0.0, noise_sd, end.shape)
    if quantize:
        end = np.round(end / rig.pixel_pitch) * rig.pixel_pitch
    extent = np.stack([c.min(axis=0), c.max(axis=0)], axis=-1)
    if len(c) > 2:
        d = np.diff(c, axis=0)
        flips = (d[1:] * d[:-1] < 0).any(axis=0)
        change = flips.any(axis=1)
    else:
        change = np.zeros(4, dtype=bool)
    return CameraObservation(float(np.asarray(times).reshape(-1)[-1]), end, extent, change)


def lift(coords, rig: ImagingRig) -> np.ndarray:
    """Ring-frame 3D points of (4, 2) screen coordinates."""
    c = np.asarray(coords, dtype=float)
    return rig.screen_origins + c[:, :1] * rig.screen_u + c[:, 1:] * rig.screen_v


def closest_points(p1, d1, p2, d2):
    """Mutual closest points of two lines ``p + s d``."""
    d1 = d1 / np.linalg.norm(d1)
    d2 = d2 / np.linalg.norm(d2)
    n = np.cross(d1, d2)
    if np.linalg.norm(n) < 1e-9:
        raise ParallelLines("reconstruction lines are parallel")
    w = p1 - p2
    b = d1 @ d2
    dd = d1 @ w
    e = d2 @ w
    den = 1.0 - b * b
    s = (b * e - dd) / den
    u = (e - b * dd) / den
    return p1 + s * d1, p2 + u * d2


def reconstruct_source(obs: CameraObservation | np.ndarray, rig: ImagingRig) -> ReconResult:
    """Point source as the near-intersection of lines x1-x3 and x2-x4."""
    coords = obs.coords if isinstance(obs, CameraObservation) else obs
    x = lift(coords, rig)
    qa, qb = closest_points(x[0], x[2] - x[0], x[1], x[3] - x[1])
    return ReconResult(0.5 * (qa + qb), float(np.linalg.norm(qa - qb)))


def fine_motion_correct(recon: ReconResult, measured_pose: Pose, nominal_source) -> float:
    """Distance between the reconstructed source and where the measured pose puts it."""
    predicted = measured_pose.apply(np.asarray(nominal_source, dtype=float))
    recon.residual_after_correction = float(np.linalg.norm(recon.p - predicted))
    return recon.residual_after_correction
