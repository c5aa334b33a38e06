import numpy as np
import pytest

from petmotion.geometry import Pose, rotation_from_rotvec_deg
from petmotion.stewart import canonical_geometry


def random_pose(rng, max_t=20.0, max_r=14.0):
    """Pose within a translation box and a rotation-angle ball."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0, max_r)
    return Pose(rotation_from_rotvec_deg(angle * axis), rng.uniform(-max_t, max_t, 3))


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def geom():
    return canonical_geometry()
