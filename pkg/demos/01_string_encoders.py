"""
Measuring head pose with six string encoders
============================================

Six draw-wire encoders run between the helmet and the imaging ring.  Their
lengths fix the helmet pose, much like the legs of a Stewart platform.
This walk-through follows one sinusoidal head motion through the
quantized counters, the edge-timed velocity estimate and the forward
kinematics.
"""

# %%
# The stand-in geometry: attachment points on two circles, 120 mm apart.
import numpy as np

from petmotion.geometry import Pose, rotation_from_axis_angle
from petmotion.stewart import (PoseTracker, canonical_geometry, inverse_kinematics, jacobian_condition,
                               leg_jacobian)

geom = canonical_geometry()
print("nominal leg lengths (mm):", np.round(geom.nominal_lengths, 3))
print("Jacobian condition number at nominal:", round(jacobian_condition(geom.nominal_pose, geom), 1))

# %%
# Inverse kinematics is closed form.  A 10 mm sideways shift with a small
# tilt changes every leg by a few millimeters.
p = Pose(rotation_from_axis_angle([1, 0, 0], 5.0), np.array([10.0, 0.0, 0.0]))
print("leg change (mm):", np.round(inverse_kinematics(p, geom) - geom.nominal_lengths, 3))

# %%
# Encoders count 60 edges per millimeter.  We drive the helmet through a
# 2 Hz, 10 mm sine along x and sample the counters at 1 kHz.
from petmotion.encoder import EncoderChannel

rate, f, amp = 1000, 2.0, 10.0
t = np.arange(2 * rate) / rate
x = amp * np.sin(2 * np.pi * f * t)
v = amp * 2 * np.pi * f * np.cos(2 * np.pi * f * t)
poses = [Pose.from_translation(xi, 0, 0) for xi in x]
legs = np.array([inverse_kinematics(q, geom) for q in poses])

enc = EncoderChannel(legs[0])
readings, rates = np.empty_like(legs), np.empty_like(legs)
for k, tk in enumerate(t):
    enc.update(legs[k], tk)
    readings[k] = enc.reading()
    rates[k] = enc.velocity(tk)

print("max length quantization error (mm):", np.abs(readings - legs).max().round(4))

# %%
# Forward kinematics turns the six readings back into a pose, and the leg
# Jacobian turns the six edge-timed rates into a twist.
tracker = PoseTracker(geom)
rot, trans, twist = tracker.update_many(readings, rates)
pos_err = np.abs(trans[:, 0] - x)
print(f"position error: mean {pos_err.mean():.3f} mm, max {pos_err.max():.3f} mm")

# The edge timer reports the speed over the last edge interval, so it lags
# slightly; compare after shifting by the best lag.
from petmotion.sim import estimate_lag

lag = estimate_lag(v, twist[:, 0], rate)
shift = int(round(lag * rate))
vel_err = np.abs(twist[shift:, 0] - v[:len(v) - shift])
print(f"velocity lag {lag * 1e3:.1f} ms, error mean {vel_err.mean():.2f} mm/s")

# %%
# Each Jacobian row is the leg direction and its moment arm.  Rates
# computed from it match finite differences of the leg lengths.
j = leg_jacobian(poses[100], geom)
fd = (legs[101] - legs[99]) / (2.0 / rate)
print("J @ twist vs finite difference:", np.round(j[:, 0] * v[100], 2), np.round(fd, 2))
