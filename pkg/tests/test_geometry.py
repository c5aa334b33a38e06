import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pose, random_rotation
from petmotion.geometry import (DegenerateGeometry, EulerZYX, Pose, axis_angle_magnitude,
                                best_fit_plane, compose, euler_zyx_array, euler_zyx_from_rotation,
                                exp_so3, exp_so3_array, inverse, log_so3, log_so3_array,
                                rotation_from_axis_angle, rotation_from_euler_zyx,
                                rotations_from_euler_array)


def assert_pose_close(a, b, tol=1e-9):
    np.testing.assert_allclose(a.rotation, b.rotation, atol=tol)
    np.testing.assert_allclose(a.translation, b.translation, atol=tol)


def is_rotation(r, tol=1e-9):
    return np.abs(r @ r.T - np.eye(3)).max() < tol and abs(np.linalg.det(r) - 1) < tol


# --- compose / inverse ----------------------------------------------------------

def test_compose_identity(rng):
    p = random_pose(rng)
    assert_pose_close(compose(Pose.identity(), p), p)
    assert_pose_close(compose(p, Pose.identity()), p)


def test_compose_with_inverse_is_identity(rng):
    for _ in range(50):
        p = random_pose(rng, 100, 180)
        assert_pose_close(compose(p, inverse(p)), Pose.identity())
        assert_pose_close(compose(inverse(p), p), Pose.identity())


def test_translations_add():
    c = compose(Pose.from_translation(1, 0, 0), Pose.from_translation(0, 2, 0))
    assert_pose_close(c, Pose.from_translation(1, 2, 0))


def test_compose_applies_right_operand_first(rng):
    a, b = random_pose(rng), random_pose(rng)
    pts = rng.normal(size=(5, 3)) * 50
    np.testing.assert_allclose(compose(a, b).apply(pts), a.apply(b.apply(pts)), atol=1e-9)


def test_inverse_examples():
    assert_pose_close(inverse(Pose.identity()), Pose.identity())
    assert_pose_close(inverse(Pose.from_translation(3, 0, 0)), Pose.from_translation(-3, 0, 0))


def test_double_inverse(rng):
    for _ in range(100):
        p = random_pose(rng, 200, 180)
        assert_pose_close(inverse(inverse(p)), p)


# --- Euler ZYX ------------------------------------------------------------------

def test_euler_identity():
    e = euler_zyx_from_rotation(np.eye(3))
    assert (e.yaw, e.pitch, e.roll) == (0.0, 0.0, 0.0)
    assert not e.gimbal_lock


def test_euler_single_axis_yaw():
    e = euler_zyx_from_rotation(rotation_from_axis_angle([0, 0, 1], 30))
    assert e.yaw == pytest.approx(30, abs=1e-12)
    assert e.pitch == pytest.approx(0, abs=1e-12)
    assert e.roll == pytest.approx(0, abs=1e-12)


def test_euler_is_intrinsic_zyx():
    r = rotation_from_euler_zyx(EulerZYX(20, 10, -5))
    expected = (rotation_from_axis_angle([0, 0, 1], 20) @ rotation_from_axis_angle([0, 1, 0], 10)
                @ rotation_from_axis_angle([1, 0, 0], -5))
    np.testing.assert_allclose(r, expected, atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(-179.9, 180), st.floats(-80, 80), st.floats(-179.9, 180))
def test_euler_round_trip(yaw, pitch, roll):
    e = euler_zyx_from_rotation(rotation_from_euler_zyx(EulerZYX(yaw, pitch, roll)))
    assert not e.gimbal_lock
    for got, want in ((e.yaw, yaw), (e.pitch, pitch), (e.roll, roll)):
        # compare on the circle so 180 and -180 agree
        assert abs((got - want + 180) % 360 - 180) < 1e-9


def test_euler_ranges(rng):
    for _ in range(2000):
        e = euler_zyx_from_rotation(random_rotation(rng))
        assert -90 <= e.pitch <= 90
        assert -180 < e.yaw <= 180 and -180 < e.roll <= 180


@pytest.mark.parametrize("pitch", [90.0, -90.0, 90 - 1e-8])
def test_gimbal_lock_flag(pitch):
    r = rotation_from_euler_zyx(EulerZYX(40, pitch, 25))
    e = euler_zyx_from_rotation(r)
    assert e.gimbal_lock
    assert e.roll == 0.0
    assert e.pitch == math.copysign(90.0, pitch)
    # the flagged split still describes the same rotation
    np.testing.assert_allclose(rotation_from_euler_zyx(e), r, atol=1e-6)


def test_euler_array_matches_scalar(rng):
    rots = np.array([random_rotation(rng) for _ in range(200)])
    arr = euler_zyx_array(rots)
    for r, a in zip(rots, arr):
        e = euler_zyx_from_rotation(r)
        np.testing.assert_allclose(a, [e.yaw, e.pitch, e.roll], atol=1e-9)
    np.testing.assert_allclose(rotations_from_euler_array(arr), rots, atol=1e-12)


# --- axis-angle -----------------------------------------------------------------

def test_axis_angle_examples(rng):
    assert axis_angle_magnitude(np.eye(3)) == 0.0
    for _ in range(20):
        axis = rng.normal(size=3)
        assert axis_angle_magnitude(rotation_from_axis_angle(axis, 14)) == pytest.approx(14, abs=1e-9)


def test_axis_angle_trace_oracle():
    r = rotation_from_euler_zyx(EulerZYX(10, 10, 0))
    # direct evaluation written out from the matrix entries
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    assert axis_angle_magnitude(r) == pytest.approx(math.degrees(math.acos((tr - 1) / 2)), abs=1e-12)


def test_axis_angle_clamps_roundoff():
    r = np.eye(3) * (1 + 1e-15)
    assert axis_angle_magnitude(r) == 0.0
    assert axis_angle_magnitude(np.diag([1.0, -1.0, -1.0])) == pytest.approx(180.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-180, 180), st.floats(-89, 89), st.floats(-180, 180))
def test_axis_angle_independent_of_parametrization(yaw, pitch, roll):
    r = rotation_from_euler_zyx(EulerZYX(yaw, pitch, roll))
    v = log_so3(r)
    angle = math.degrees(np.linalg.norm(v))
    if angle > 1e-6:
        rebuilt = rotation_from_axis_angle(v, angle)
        assert axis_angle_magnitude(rebuilt) == pytest.approx(axis_angle_magnitude(r), abs=1e-7)
        assert axis_angle_magnitude(r) == pytest.approx(angle, abs=1e-6)


# --- exponential / log maps -------------------------------------------------------

def test_exp_log_round_trip(rng):
    for _ in range(500):
        v = rng.normal(size=3)
        v *= rng.uniform(0, 3.1) / np.linalg.norm(v)
        np.testing.assert_allclose(log_so3(exp_so3(v)), v, atol=1e-9)


def test_log_near_pi():
    v = np.array([0.0, 0.0, math.pi - 1e-9])
    np.testing.assert_allclose(np.abs(log_so3(exp_so3(v))), np.abs(v), atol=1e-6)


def test_batched_maps_match_scalar(rng):
    v = rng.normal(size=(300, 3))
    v[:5] = 0.0
    v[5:10] *= 1e-9
    rots = exp_so3_array(v)
    for vi, ri in zip(v, rots):
        np.testing.assert_allclose(ri, exp_so3(vi), atol=1e-13)
    np.testing.assert_allclose(log_so3_array(rots), [log_so3(r) for r in rots], atol=1e-9)


def test_rotations_orthonormal_under_many_trials(rng):
    vecs = rng.normal(size=(10_000, 3)) * 2
    rots = exp_so3_array(vecs)
    err = np.abs(np.einsum("nij,nkj->nik", rots, rots) - np.eye(3)).max()
    assert err < 1e-9
    assert np.abs(np.linalg.det(rots) - 1).max() < 1e-9
    angles = rng.uniform(-180, 180, size=(10_000, 3))
    angles[:, 1] /= 2
    rots = rotations_from_euler_array(angles)
    assert np.abs(np.einsum("nij,nkj->nik", rots, rots) - np.eye(3)).max() < 1e-9


def test_compose_output_is_rotation(rng):
    p = Pose.identity()
    for _ in range(10_000):
        p = compose(random_pose(rng, 1, 30), p)
    assert is_rotation(p.rotation)


# --- best-fit plane -----------------------------------------------------------------

def test_plane_horizontal():
    pts = [[0, 0, 5], [10, 0, 5], [0, 10, 5], [7, 3, 5]]
    np.testing.assert_allclose(best_fit_plane(pts), [0, 0, 1], atol=1e-12)


def test_plane_tilted(rng):
    n = np.array([0.3, -0.4, 0.8])
    n /= np.linalg.norm(n)
    u = np.cross(n, [1, 0, 0])
    u /= np.linalg.norm(u)
    w = np.cross(n, u)
    pts = np.array([a * u + b * w for a, b in rng.normal(size=(4, 2)) * 40]) + [5, 6, 7]
    np.testing.assert_allclose(best_fit_plane(pts), n, atol=1e-9)


def test_plane_sign_convention():
    pts = np.array([[0, 0, 0], [1, 0, -1], [0, 1, 0], [1, 1, -1.0]])
    assert best_fit_plane(pts)[2] > 0
    assert np.linalg.norm(best_fit_plane(pts)) == pytest.approx(1, abs=1e-12)


def test_plane_noisy_beats_grid_search(rng):
    pts = rng.normal(size=(4, 3)) * [50, 50, 2]
    c = pts - pts.mean(axis=0)

    def cost(n):
        return float(np.sum((c @ n) ** 2))

    best = best_fit_plane(pts)
    step = math.radians(0.5)
    grid = [(th, ph) for th in np.arange(0, math.pi / 2 + step, step)
            for ph in np.arange(0, 2 * math.pi, step)]
    normals = np.array([[math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)]
                        for t, p in grid])
    assert cost(best) <= min(cost(n) for n in normals) + 1e-9


def test_plane_translation_invariant(rng):
    pts = rng.normal(size=(6, 3)) * [30, 30, 3]
    n0 = best_fit_plane(pts)
    for _ in range(10):
        np.testing.assert_allclose(best_fit_plane(pts + rng.normal(size=3) * 500), n0, atol=1e-12)


@pytest.mark.parametrize("pts", [
    [[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]],
    [[1, 2, 3]] * 4,
])
def test_plane_degenerate(pts):
    with pytest.raises(DegenerateGeometry):
        best_fit_plane(pts)


def test_plane_needs_three_points():
    with pytest.raises(DegenerateGeometry):
        best_fit_plane([[0, 0, 0], [1, 0, 0]])
