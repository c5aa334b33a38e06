"""Bundled head-motion data.

``head_like_markers.csv`` holds 31 s of 60 Hz motion-capture style marker
positions for a subject walking forward at 1.2 m/s while the head moves
with the gait-like pattern of :func:`~petmotion.trajectory.head_like_trajectory`.
``head_like_trajectory.csv`` is the same recording after
:func:`~petmotion.trajectory.process_markers`.  ``tools/make_data.py``
regenerates both.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .trajectory import Trajectory, read_markers, read_trajectory

HEAD_MARKERS = "head_like_markers.csv"
HEAD_TRAJECTORY = "head_like_trajectory.csv"


def data_path(name: str) -> Path:
    return Path(str(resources.files("petmotion") / "data" / name))


def head_like_markers():
    return read_markers(data_path(HEAD_MARKERS))


def head_like() -> Trajectory:
    """The bundled processed head trajectory."""
    return read_trajectory(data_path(HEAD_TRAJECTORY))
