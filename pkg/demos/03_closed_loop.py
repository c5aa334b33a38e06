"""
Closed-loop motion compensation
===============================

A head robot replays the head trajectory; a ring robot carries the
imaging ring and follows the helmet using the string-encoder measurement.
Between them sit three delays: the measurement (4 ms), the 30-sample
averaging filter (about 15 ms) and the robot itself (16 ms).
"""

# %%
import time

import numpy as np

from petmotion.datasets import head_like
from petmotion.sim import LatencyConfig, RateSchedule, compute_metrics, run_closed_loop, run_ramp_test
from petmotion.stewart import canonical_geometry

geom = canonical_geometry()
traj = head_like()

# %%
# First the robot latency on its own, from an 80 mm/s ramp.
ramp = run_ramp_test(80.0, 200.0, robot_delay=0.016)
print(f"ramp lag: {ramp.lag * 1e3:.1f} ms")

# %%
# A 30 s run on the head-like trajectory.
start = time.perf_counter()
log = run_closed_loop(traj, geom, schedule=RateSchedule(duration=30.0), seed=0)
m = compute_metrics(log)
print(f"simulated 30 s in {time.perf_counter() - start:.1f} s")
for key, value in m.to_dict().items():
    print(f"  {key:24s} {value:.4g}")

# %%
# The x-y error has to stay inside the 18 mm clearance between helmet
# and ring.  Its time course, coarsely binned:
enc = log.encoder
xy = np.linalg.norm(enc["rel_true"][:, :2], axis=1)
for t0 in range(0, 30, 5):
    sel = (enc["t"] >= t0) & (enc["t"] < t0 + 5)
    print(f"  {t0:2d}-{t0 + 5:2d} s: mean {xy[sel].mean():5.2f} mm, max {xy[sel].max():5.2f} mm")

# %%
# Longer robot delays eat into the clearance.
for delay in (0.016, 0.032, 0.048, 0.064):
    r = run_closed_loop(traj, geom, schedule=RateSchedule(duration=10.0),
                        latencies=LatencyConfig(robot_delay=delay))
    mm = compute_metrics(r)
    print(f"  robot delay {delay * 1e3:4.0f} ms: xy mean {mm.xy_error_mean:5.2f} mm, "
          f"max {mm.xy_error_max:5.2f} mm, lag {mm.lag_typical * 1e3:5.1f} ms")

# %%
# Fine correction: the camera sees where the lasers hit the screens; the
# encoder pose predicts where the source should be.  What is left is
# pixel quantization and encoder resolution.
res = log.camera["residual"]
print(f"fine-correction residual: mean {res.mean():.3f} mm, sd {res.std():.3f} mm, "
      f"{len(res)} frames, {log.meta['camera_frames_dropped']} dropped")
