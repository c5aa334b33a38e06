import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import savgol_filter

from petmotion.datasets import head_like, head_like_markers
from petmotion.geometry import (DegenerateGeometry, EulerZYX, Pose, euler_zyx_from_rotation,
                                rotation_from_axis_angle, rotation_from_euler_zyx)
from petmotion.trajectory import (HEAD_ENVELOPE, AXIS_NAMES, DegenerateInput, InvalidConfig,
                                  MarkerFileError, MarkerFrame, Trajectory, ZeroDirection,
                                  angular_to_euler_rates, euler_rates_to_angular, fit_c7_line,
                                  generate_ramp, generate_sine, head_center_translation,
                                  head_like_trajectory, head_orientation, normalize_and_encode,
                                  process_markers, read_markers, read_trajectory, savgol,
                                  savgol_coefficients, synthesize_markers, trajectory_stats,
                                  write_markers, write_trajectory, zero_trajectory)

LAYOUT = np.array([[90.0, 60, 0], [90, -60, 0], [-90, 60, 0], [-90, -60, 0]])


def frame(t, rot=np.eye(3), center=(0.0, 0.0, 0.0), c7=(0.0, 0.0, 0.0)):
    head = LAYOUT @ rot.T + np.asarray(center, dtype=float)
    return MarkerFrame(t, head[0], head[1], head[2], head[3], np.asarray(c7, dtype=float))


# --- C7 line ------------------------------------------------------------------------------

def test_c7_exact_line():
    frames = [frame(t, c7=(1 + 2 * t, -3 * t, 5.0)) for t in np.arange(10) / 60]
    fit = fit_c7_line(frames)
    np.testing.assert_allclose(fit.point, [1, 0, 5], atol=1e-12)
    np.testing.assert_allclose(fit.velocity, [2, -3, 0], atol=1e-10)
    assert fit.residual < 1e-10


def test_c7_constant():
    fit = fit_c7_line([frame(t, c7=(4, 5, 6)) for t in range(5)])
    np.testing.assert_allclose(fit.velocity, 0, atol=1e-12)


def test_c7_noisy_slope_within_standard_errors():
    t = np.arange(120) / 60
    sd = 2.0
    se = sd / math.sqrt(np.sum((t - t.mean()) ** 2))
    bad = 0
    for seed in range(100):
        noise = np.random.default_rng(seed).normal(0, sd, (len(t), 3))
        frames = [frame(ti, c7=np.array([1000 * ti, 5, -2 * ti]) + n) for ti, n in zip(t, noise)]
        fit = fit_c7_line(frames)
        bad += np.any(np.abs(fit.velocity - [1000, 0, -2]) > 3 * se)
    assert bad <= 3


def test_c7_needs_two_frames():
    with pytest.raises(DegenerateInput):
        fit_c7_line([frame(0.0)])


# --- head center ---------------------------------------------------------------------------

def test_head_center_examples():
    fit = fit_c7_line([frame(0, c7=(1, 2, 3)), frame(1, c7=(1, 2, 3))])
    q = np.array([10.0, 20, 30])
    f = MarkerFrame(0.5, q, q, q, q, np.zeros(3))
    np.testing.assert_allclose(head_center_translation(f, fit), q - [1, 2, 3], atol=1e-12)
    sym = frame(0.0)
    zero = fit_c7_line([frame(0), frame(1)])
    np.testing.assert_allclose(head_center_translation(sym, zero), 0, atol=1e-12)


def test_head_center_hand_computed():
    f = MarkerFrame(0.0, np.array([95.0, 61, 3]), np.array([88.0, -59, 1]),
                    np.array([-91.0, 62, -2]), np.array([-89.0, -58, 0]), np.zeros(3))
    fit = fit_c7_line([frame(0, c7=(-60, 0, -150)), frame(1, c7=(-60, 0, -150))])
    want = np.array([(95 + 88 - 91 - 89) / 4 + 60, (61 - 59 + 62 - 58) / 4, (3 + 1 - 2 + 0) / 4 + 150])
    np.testing.assert_allclose(head_center_translation(f, fit), want, atol=1e-12)


def test_head_center_symmetric_under_relabeling(rng):
    f = MarkerFrame(0.0, *rng.normal(size=(5, 3)) * 50)
    swapped = MarkerFrame(0.0, f.p_reye, f.p_leye, f.p_rear, f.p_lear, f.p_c7)
    fit = fit_c7_line([frame(0), frame(1)])
    np.testing.assert_allclose(head_center_translation(f, fit), head_center_translation(swapped, fit))


# --- orientation ---------------------------------------------------------------------------

def test_orientation_level_head():
    r = head_orientation(frame(0.0))
    np.testing.assert_allclose(r, np.eye(3), atol=1e-12)
    np.testing.assert_array_equal(r[:, 1], np.cross(r[:, 2], r[:, 0]))


def test_orientation_tilted_plane():
    rot = rotation_from_axis_angle([0, 1, 0], 17.0)
    r = head_orientation(frame(0.0, rot, (5, 6, 7)))
    np.testing.assert_allclose(r[:, 2], rot[:, 2], atol=1e-9)
    np.testing.assert_allclose(r, rot, atol=1e-9)


def test_orientation_always_rotation(rng):
    for _ in range(200):
        f = MarkerFrame(0.0, *(LAYOUT[[0, 1, 2, 3]] + rng.normal(size=(4, 3)) * 10), np.zeros(3))
        r = head_orientation(f)
        assert np.abs(r @ r.T - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(r) - 1) < 1e-9


def test_orientation_errors():
    p = np.array([1.0, 1.0, 1.0])
    with pytest.raises(DegenerateGeometry):
        head_orientation(MarkerFrame(0.0, p, p, p, p, p))
    # front and back pairs share a midpoint
    f = MarkerFrame(0.0, np.array([1.0, 0, 0]), np.array([-1.0, 0, 0]), np.array([0, 1.0, 0]),
                    np.array([0, -1.0, 0]), np.zeros(3))
    with pytest.raises(ZeroDirection):
        head_orientation(f)


# --- normalization ---------------------------------------------------------------------------

def test_normalize_single_frame():
    traj = normalize_and_encode([frame(0.0, rotation_from_axis_angle([1, 2, 3], 30))])
    np.testing.assert_allclose(traj.pose[0, 3:], 0, atol=1e-12)


def test_normalize_constant_orientation():
    rot = rotation_from_axis_angle([1, 0, 1], 20)
    traj = normalize_and_encode([frame(t, rot) for t in np.arange(10) / 60])
    np.testing.assert_allclose(traj.pose[:, 3:], 0, atol=1e-9)


def test_normalize_recovers_relative_profile():
    r0 = rotation_from_axis_angle([0.3, -1, 0.2], 25)
    t = np.arange(30) / 60
    angles = np.column_stack([10 * np.sin(3 * t), 5 * t, -4 * np.cos(2 * t) + 4])
    frames = [frame(ti, r0 @ rotation_from_euler_zyx(EulerZYX(*a))) for ti, a in zip(t, angles)]
    traj = normalize_and_encode(frames)
    np.testing.assert_allclose(traj.pose[:, 3:], angles, atol=1e-9)


# --- Savitzky-Golay --------------------------------------------------------------------------

@pytest.mark.parametrize("deriv", [0, 1, 2])
def test_savgol_matches_scipy(rng, deriv):
    dt = 1 / 60
    y = rng.normal(size=(200, 3))
    ours = savgol(y, dt, 4, 17, deriv)
    ref = savgol_filter(y, 17, 4, deriv=deriv, delta=dt, axis=0, mode="interp")
    np.testing.assert_allclose(ours, ref, atol=1e-8 * dt ** -deriv)


def test_savgol_quartic_exact():
    t = np.arange(100) / 60
    p = 3 - 2 * t + 0.5 * t ** 2 - 4 * t ** 3 + 1.5 * t ** 4
    dp = -2 + t - 12 * t ** 2 + 6 * t ** 3
    d2p = 1 - 24 * t + 18 * t ** 2
    dt = 1 / 60
    np.testing.assert_allclose(savgol(p, dt), p, atol=1e-9)
    np.testing.assert_allclose(savgol(p, dt, deriv=1), dp, atol=1e-9)
    np.testing.assert_allclose(savgol(p, dt, deriv=2), d2p, atol=1e-7)


def test_savgol_cubic_derivative():
    dt = 1 / 60
    t = np.arange(120) * dt
    d = savgol(t ** 3, dt, deriv=1)
    np.testing.assert_allclose(d[8:-8], 3 * t[8:-8] ** 2, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5))
def test_savgol_derivative_of_smoothed_polynomial(coef):
    dt = 1 / 60
    t = np.arange(60) * dt
    y = np.polyval(coef, t)
    dy = np.polyval(np.polyder(coef), t)
    d = savgol(savgol(y, dt), dt, deriv=1)
    scale = 1 + np.abs(dy).max()
    assert np.abs(d[8:-8] - dy[8:-8]).max() < 1e-9 * scale


def test_savgol_noise_attenuation():
    w = savgol_coefficients(17, 4)
    gain = float(w @ w)
    ratios = []
    for seed in range(100):
        y = np.random.default_rng(seed).normal(size=2000)
        ratios.append(np.var(savgol(y)[8:-8]) / np.var(y))
    assert abs(np.mean(ratios) / gain - 1) < 0.1


@pytest.mark.parametrize("kwargs", [dict(window=16), dict(window=3), dict(deriv=5), dict(dt=0)])
def test_savgol_rejects_bad_parameters(kwargs):
    with pytest.raises(InvalidConfig):
        savgol(np.zeros(40), **kwargs)


def test_savgol_rejects_short_series():
    with pytest.raises(InvalidConfig):
        savgol(np.zeros(10))


# --- Euler rates -------------------------------------------------------------------------------

def test_euler_rate_conversion_round_trip(rng):
    angles = rng.uniform(-60, 60, (50, 3))
    rates = rng.normal(size=(50, 3)) * 20
    accels = rng.normal(size=(50, 3)) * 100
    w, alpha = euler_rates_to_angular(angles, rates, accels)
    r2, a2 = angular_to_euler_rates(angles, w, alpha)
    np.testing.assert_allclose(r2, rates, atol=1e-9)
    np.testing.assert_allclose(a2, accels, atol=1e-7)


def test_angular_velocity_matches_rotation_derivative():
    def rot(t):
        return rotation_from_euler_zyx(EulerZYX(20 * math.sin(t), 10 * t, 5 * math.cos(2 * t)))

    t, h = 0.7, 1e-6
    rates = np.array([[20 * math.cos(t), 10, -10 * math.sin(2 * t)]])
    angles = np.array([[20 * math.sin(t), 10 * t, 5 * math.cos(2 * t)]])
    w = euler_rates_to_angular(angles, rates)
    rdot = (rot(t + h) - rot(t - h)) / (2 * h)
    wx = rdot @ rot(t).T
    np.testing.assert_allclose(w[0], np.degrees([wx[2, 1], wx[0, 2], wx[1, 0]]), atol=1e-6)


# --- generators --------------------------------------------------------------------------------

def test_sine_examples():
    tr = generate_sine(2.0, 10.0, "x", 2.0, 240)
    assert tr.pose[0, 0] == 0.0
    assert tr.twist[0, 0] == pytest.approx(2 * math.pi * 2 * 10)
    assert tr.twist[0, 0] == pytest.approx(125.66, abs=0.01)
    quarter = 30  # 1/8 s is a quarter period at 2 Hz
    assert tr.pose[quarter, 0] == pytest.approx(10.0)
    assert tr.twist[quarter, 0] == pytest.approx(0.0, abs=1e-12)


def test_sine_derivatives_consistent():
    tr = generate_sine(2.0, 10.0, "y", 2.0, 600)
    fd = np.gradient(tr.pose[:, 1], tr.t)
    assert np.abs(fd[1:-1] - tr.twist[1:-1, 1]).max() < 0.05


def test_sine_rotation_axis_uses_angular_velocity():
    tr = generate_sine(1.0, 5.0, "yaw", 1.0, 60)
    np.testing.assert_allclose(tr.twist[:, 5], tr.pose[:, 3] * 0 + 5 * 2 * math.pi * np.cos(2 * math.pi * tr.t))
    with pytest.raises(InvalidConfig):
        generate_sine(1.0, 95.0, "pitch")


def test_ramp_examples():
    tr = generate_ramp(80.0, 200.0, "x", 60)
    assert tr.pose[0, 0] == 0.0
    assert tr.pose[60, 0] == pytest.approx(80.0)
    after = tr.t >= 2.5
    np.testing.assert_allclose(tr.pose[after, 0], 200.0)
    np.testing.assert_array_equal(tr.twist[after, 0], 0.0)
    with pytest.raises(InvalidConfig):
        generate_ramp(0.0)


def test_head_like_matches_envelope():
    s = trajectory_stats(head_like_trajectory())
    for name in AXIS_NAMES:
        _, _, sv, sa = HEAD_ENVELOPE[name]
        assert s[name]["velocity"]["sd"] == pytest.approx(sv, rel=0.01)
        assert s[name]["acceleration"]["sd"] == pytest.approx(sa, rel=0.01)


def test_bundled_trajectory_is_processed_markers():
    tr = head_like()
    again = process_markers(head_like_markers())
    np.testing.assert_allclose(tr.pose, again.pose, atol=1e-9)
    np.testing.assert_allclose(tr.twist, again.twist, rtol=1e-9, atol=1e-8)
    s = trajectory_stats(tr)
    for name in AXIS_NAMES:
        assert s[name]["velocity"]["sd"] == pytest.approx(HEAD_ENVELOPE[name][2], rel=0.05)
        assert s[name]["acceleration"]["sd"] == pytest.approx(HEAD_ENVELOPE[name][3], rel=0.05)


# --- statistics ---------------------------------------------------------------------------------

def test_stats_closed_form_sine():
    rate, f, a = 60, 2.0, 10.0
    t = np.arange(120) / rate
    om = 2 * math.pi * f
    pose = np.zeros((120, 6))
    vel = np.zeros((120, 6))
    acc = np.zeros((120, 6))
    pose[:, 1] = a * np.sin(om * t)
    vel[:, 1] = a * om * np.cos(om * t)
    acc[:, 1] = -a * om ** 2 * np.sin(om * t)
    s = trajectory_stats(Trajectory(t, pose, vel, acc), skip_initial=0.0)["y"]
    assert s["displacement"]["mean"] == pytest.approx(0, abs=1e-9)
    assert s["displacement"]["sd"] == pytest.approx(a / math.sqrt(2), abs=1e-6)
    assert s["velocity"]["sd"] == pytest.approx(a * om / math.sqrt(2), abs=1e-6)
    assert s["acceleration"]["sd"] == pytest.approx(a * om ** 2 / math.sqrt(2), abs=1e-6)


def test_stats_skip_initial():
    t = np.arange(180) / 60
    pose = np.zeros((180, 6))
    pose[:60, 0] = 100.0
    s = trajectory_stats(Trajectory(t, pose), skip_initial=1.0)
    assert s["x"]["displacement"]["mean"] == 0.0


def test_markers_with_known_motion_give_closed_form_stats():
    rate = 60
    t = np.arange(181) / rate
    pose = np.zeros((len(t), 6))
    pose[:, 0] = 5 * t ** 2 - 3 * t
    pose[:, 2] = 2 * t
    pose[:, 3] = 6 * t
    truth = Trajectory(t, pose)
    traj = process_markers(synthesize_markers(truth, c7_offset=(0, 0, 0)))
    s = trajectory_stats(traj)
    m = t >= 1.0
    x, vx = pose[m, 0], 10 * t[m] - 3
    assert s["x"]["displacement"]["mean"] == pytest.approx(x.mean(), abs=1e-6)
    assert s["x"]["displacement"]["sd"] == pytest.approx(x.std(), abs=1e-6)
    assert s["x"]["velocity"]["sd"] == pytest.approx(vx.std(), abs=1e-6)
    assert s["x"]["acceleration"]["mean"] == pytest.approx(10.0, abs=1e-6)
    assert s["x"]["acceleration"]["sd"] == pytest.approx(0.0, abs=1e-6)
    assert s["z"]["velocity"]["mean"] == pytest.approx(2.0, abs=1e-6)
    assert s["yaw"]["velocity"]["mean"] == pytest.approx(6.0, abs=1e-6)
    assert s["yaw"]["velocity"]["sd"] == pytest.approx(0.0, abs=1e-6)


def test_constant_markers_zero_motion():
    frames = [frame(t, rotation_from_axis_angle([0, 1, 1], 10), (1, 2, 3), (4, 5, 6))
              for t in np.arange(60) / 60]
    s = trajectory_stats(process_markers(frames), skip_initial=0.0)
    for name in AXIS_NAMES:
        for q in ("velocity", "acceleration"):
            assert abs(s[name][q]["mean"]) < 1e-9 and s[name][q]["sd"] < 1e-9


def test_non_uniform_frames_rejected():
    t = np.arange(40) / 60
    t[20:] += 0.005
    with pytest.raises(DegenerateInput):
        process_markers([frame(ti) for ti in t])


# --- files --------------------------------------------------------------------------------------

def test_marker_file_round_trip(tmp_path):
    frames = synthesize_markers(generate_sine(1.0, 5.0, "x", 1.0, 60))
    path = tmp_path / "m.csv"
    write_markers(path, frames)
    back = read_markers(path)
    assert len(back) == len(frames)
    np.testing.assert_allclose(back[10].to_row(), frames[10].to_row(), atol=1e-6)


def test_marker_file_nan_reports_line(tmp_path):
    frames = synthesize_markers(zero_trajectory(0.5))
    path = tmp_path / "m.csv"
    write_markers(path, frames)
    lines = path.read_text().splitlines()
    parts = lines[7].split(",")
    parts[4] = "nan"
    lines[7] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MarkerFileError) as info:
        read_markers(path)
    assert info.value.line == 8
    assert "line 8" in str(info.value)


@pytest.mark.parametrize("body, line", [("1,2,3\n", 2), ("", 1)])
def test_marker_file_malformed(tmp_path, body, line):
    path = tmp_path / "m.csv"
    header = "t,leye_x,leye_y,leye_z,reye_x,reye_y,reye_z,lear_x,lear_y,lear_z,rear_x,rear_y,rear_z,c7_x,c7_y,c7_z\n"
    path.write_text(header + body if body else "")
    with pytest.raises(MarkerFileError) as info:
        read_markers(path)
    assert info.value.line == line


def test_trajectory_file_round_trip(tmp_path):
    tr = head_like_trajectory(duration=2.0)
    path = tmp_path / "traj.csv"
    write_trajectory(path, tr)
    back = read_trajectory(path)
    np.testing.assert_allclose(back.pose, tr.pose, rtol=1e-11, atol=1e-9)
    np.testing.assert_allclose(back.accel, tr.accel, rtol=1e-11, atol=1e-9)


# --- trajectory container ----------------------------------------------------------------------

def test_resample_keeps_matching_grid():
    tr = generate_sine(2.0, 10.0, "x", 1.0, 60)
    assert tr.resample(60) is tr


def test_resample_cubic():
    tr = generate_sine(0.5, 10.0, "z", 2.0, 60)
    up = tr.resample(240)
    assert len(up) == 481
    np.testing.assert_allclose(up.pose[:, 2], 10 * np.sin(math.pi * up.t), atol=1e-4)


def test_trajectory_validation():
    with pytest.raises(InvalidConfig):
        Trajectory([0, 0.1, 0.1], np.zeros((3, 6)))
    with pytest.raises(InvalidConfig):
        Trajectory([0, 0.1], np.full((2, 6), np.nan))
    with pytest.raises(InvalidConfig):
        Trajectory([0, 0.1], np.zeros((3, 6)))


def test_pose_accessors():
    tr = generate_sine(1.0, 5.0, "pitch", 1.0, 60)
    p = tr.pose_at_index(15)
    assert isinstance(p, Pose)
    assert euler_zyx_from_rotation(p.rotation).pitch == pytest.approx(tr.pose[15, 4])
    assert len(tr.samples()) == len(tr)
    assert tr.window(0.25, 0.5).t[0] == pytest.approx(0.25)
