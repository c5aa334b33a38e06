"""Deterministic multi-rate simulation of the measurement and compensation loop.

Signal path: head trajectory -> head robot (UR3 model) -> six string
encoders between helmet and ring -> forward kinematics and averaging ->
ring-following controller -> ring robot (UR5 model), with the laser/camera
rig watching the helmet-ring pose.  All rate domains run off one integer
clock whose rate is the least common multiple of the configured rates;
values cross domains as latest-value snapshots.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .control import (AveragingFilter, GainConfig, PlantLimits, PoseError, RobotPlant,
                      coarse_command, exp_gain, reproduction_command)
from .encoder import COUNTS_PER_MM, EncoderChannel
from .geometry import (Pose, Twist, compose, cross, euler_zyx_array, exp_so3, inverse, log_so3_array,
                       rotation_angles_array, rotations_from_euler_array)
from .imaging import ImagingRig, RayMiss, camera_observe, fine_motion_correct, project_lasers, reconstruct_source
from .stewart import StewartGeometry, PoseTracker, canonical_geometry, inverse_kinematics, leg_jacobians
from .trajectory import Trajectory, generate_ramp

CLEARANCE_MM = 18.0
RAD2DEG = 180.0 / math.pi
DEG = math.pi / 180.0


class ConfigMismatch(ValueError):
    pass


class LowCorrelation(ValueError):
    pass


class SimulationAborted(RuntimeError):
    """Numerical failure inside the loop; ``tick`` is the encoder tick index."""

    def __init__(self, tick: int, cause: Exception):
        super().__init__(f"simulation aborted at encoder tick {tick}: {cause}")
        self.tick = tick
        self.cause = cause


@dataclass
class RateSchedule:
    encoder_rate: float = 1000.0
    ur5_rate: float = 125.0
    ur3_rate: float = 60.0
    camera_rate: float = 30.0
    duration: float = 30.0

    def __post_init__(self):
        rates = (self.encoder_rate, self.ur5_rate, self.ur3_rate, self.camera_rate)
        if min(rates) <= 0 or self.duration <= 0:
            raise ConfigMismatch("rates and duration must be positive")
        if self.encoder_rate < max(rates):
            raise ConfigMismatch("encoder rate must be the highest rate")

    def base_rate(self) -> int:
        """Smallest clock rate (Hz) at which every configured rate divides evenly."""
        out = 1
        for r in (self.encoder_rate, self.ur5_rate, self.ur3_rate):
            f = Fraction(r).limit_denominator(1000)
            if f.denominator != 1:
                raise ConfigMismatch(f"rate {r} must be an integer number of Hz")
            out = out * f.numerator // math.gcd(out, f.numerator)
        return out


@dataclass
class LatencyConfig:
    measurement_delay: float = 0.004
    filter_window: int = 30
    robot_delay: float = 0.016
    ur3_delay: float = 0.016

    def __post_init__(self):
        if min(self.measurement_delay, self.robot_delay, self.ur3_delay) < 0 or self.filter_window < 1:
            raise ConfigMismatch("latencies must be >= 0 and the filter window >= 1")

    @property
    def nominal_total(self) -> float:
        """Measurement delay + half the averaging window (at 1 kHz) + robot delay (s)."""
        return self.measurement_delay + 0.5 * self.filter_window * 1e-3 + self.robot_delay


@dataclass
class NoiseConfig:
    """Measurement imperfections.  ``NoiseConfig.disabled()`` gives an exact sensor."""

    encoder_quantization: bool = True
    pixel_quantization: bool = True
    encoder_noise_sd: float = 0.0
    camera_noise_sd: float = 0.0

    @classmethod
    def disabled(cls) -> "NoiseConfig":
        return cls(False, False, 0.0, 0.0)


@dataclass
class SimOptions:
    ur3_kp: float = 3.0
    ur5_limits: PlantLimits = field(default_factory=PlantLimits)
    ur3_limits: PlantLimits = field(default_factory=lambda: PlantLimits(500.0, 120.0, 5000.0, 2000.0))
    ur5_enabled: bool = True
    camera_enabled: bool = True
    ring_offset: Pose | None = None  # initial ring misalignment, ring frame


# --- log ------------------------------------------------------------------------

POSE_COLS = ("x", "y", "z", "yaw", "pitch", "roll")
TWIST_COLS = ("vx", "vy", "vz", "wx", "wy", "wz")
VEC_COLS = ("x", "y", "z", "rx", "ry", "rz")

SCHEMAS = {
    "encoder": [("t", ()), ("head", POSE_COLS), ("head_twist", TWIST_COLS), ("ring", POSE_COLS),
                ("ring_twist", TWIST_COLS), ("rel_true", POSE_COLS), ("rel_true_twist", TWIST_COLS),
                ("rel_meas", POSE_COLS), ("rel_meas_twist", TWIST_COLS), ("ex_filt", VEC_COLS),
                ("exdot_filt", TWIST_COLS)],
    "ur5": [("t", ()), ("command", TWIST_COLS), ("measured_twist", TWIST_COLS), ("gain_t", ()),
            ("gain_r", ())],
    "ur3": [("t", ()), ("desired", POSE_COLS), ("desired_twist", TWIST_COLS),
            ("command", TWIST_COLS), ("measured_twist", TWIST_COLS)],
    "camera": [("t", ()), ("coords", ("x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4")),
               ("p", ("x", "y", "z")), ("gap", ()), ("residual", ()),
               ("smear", ("w1", "w2", "w3", "w4")), ("direction_change", ("s1", "s2", "s3", "s4"))],
}


def _header(schema):
    cols = []
    for name, sub in schema:
        cols.extend([name] if not sub else [f"{name}_{s}" for s in sub])
    return cols


class LogFormatError(ValueError):
    pass


@dataclass
class SimLog:
    """Time-aligned record of one run, one table per rate domain.

    Each table maps a group name from :data:`SCHEMAS` to an array of shape
    ``(rows,)`` or ``(rows, k)``.  ``meta`` holds the run configuration.
    """

    meta: dict
    encoder: dict
    ur5: dict
    ur3: dict
    camera: dict

    def table(self, name: str) -> dict:
        return getattr(self, name)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "meta.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")
        for name, schema in SCHEMAS.items():
            tab = self.table(name)
            n = len(tab["t"])
            cols = [np.asarray(tab[g], dtype=float).reshape(n, -1) for g, _ in schema]
            data = np.hstack(cols) if n else np.zeros((0, len(_header(schema))))
            with open(d / f"{name}.csv", "w") as fh:
                fh.write(",".join(_header(schema)) + "\n")
                if n:
                    np.savetxt(fh, data, delimiter=",", fmt="%.12g")

    @classmethod
    def load(cls, directory) -> "SimLog":
        """Read a saved log, checking headers, row widths and time ordering."""
        d = Path(directory)
        try:
            meta = json.loads((d / "meta.json").read_text())
        except FileNotFoundError:
            raise LogFormatError(f"{d / 'meta.json'} is missing") from None
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"meta.json: {exc}") from None
        tables = {}
        for name, schema in SCHEMAS.items():
            path = d / f"{name}.csv"
            if not path.exists():
                raise LogFormatError(f"{path} is missing")
            header = _header(schema)
            lines = path.read_text().splitlines()
            if not lines or lines[0].split(",") != header:
                raise LogFormatError(f"{path}: bad header")
            rows = []
            for i, line in enumerate(lines[1:], start=2):
                parts = line.split(",")
                if len(parts) != len(header):
                    raise LogFormatError(f"{path}: line {i} has {len(parts)} fields, expected {len(header)}")
                try:
                    rows.append([float(p) for p in parts])
                except ValueError:
                    raise LogFormatError(f"{path}: line {i} is not numeric") from None
            data = np.array(rows).reshape(-1, len(header))
            if len(data) > 1 and np.any(np.diff(data[:, 0]) <= 0):
                raise LogFormatError(f"{path}: time column not strictly increasing")
            tab, c = {}, 0
            for g, sub in schema:
                w = max(len(sub), 1)
                tab[g] = data[:, c] if not sub else data[:, c:c + w]
                c += w
            tables[name] = tab
        expected = meta.get("duration")
        enc_t = tables["encoder"]["t"]
        if expected is not None and (len(enc_t) == 0 or enc_t[-1] < expected - 1.5 / meta["encoder_rate"]):
            raise LogFormatError("log is truncated: encoder table ends before the configured duration")
        return cls(meta, **tables)


def _pose_vecs(rot, trans):
    return np.hstack([trans, euler_zyx_array(rot)])


# --- main loop -------------------------------------------------------------------

def run_closed_loop(trajectory: Trajectory, geometry: StewartGeometry | None = None,
                    rig: ImagingRig | None = None, gains: GainConfig | None = None,
                    schedule: RateSchedule | None = None, latencies: LatencyConfig | None = None,
                    seed: int = 0, noise: NoiseConfig | None = None,
                    options: SimOptions | None = None) -> SimLog:
    """Simulate the head robot, string encoders, ring robot and cameras.

    Event order within a clock tick is encoder, head robot, ring robot.
    Camera frames end on encoder ticks (the nearest one to each frame
    time); fine correction pairs a frame with the encoder sample whose
    acquisition time matches the exposure end.

    Raises
    ------
    SimulationAborted
        Forward kinematics failed; carries the encoder tick index.
    ConfigMismatch
        Trajectory shorter than the run, or inconsistent rates.
    """
    geom = geometry or canonical_geometry()
    rig = rig or ImagingRig.default(nominal_pose=geom.nominal_pose)
    gains = gains or GainConfig()
    sched = schedule or RateSchedule()
    lat = latencies or LatencyConfig()
    noise = noise or NoiseConfig()
    opt = options or SimOptions()
    rng = np.random.default_rng(seed)

    base = sched.base_rate()
    enc_rate = int(round(sched.encoder_rate))
    enc_div = base // enc_rate
    ur5_div = base // int(round(sched.ur5_rate))
    ur3_div = base // int(round(sched.ur3_rate))
    n_base = int(math.floor(sched.duration * base + 1e-9))
    n_enc = n_base // enc_div + 1

    traj = trajectory.resample(sched.ur3_rate)
    if len(traj) < n_base // ur3_div + 1:
        raise ConfigMismatch(f"trajectory covers {traj.duration:.3f} s, run needs {sched.duration:.3f} s")

    nominal = geom.nominal_pose
    nominal_inv = inverse(nominal)
    head0 = traj.pose_at_index(0)
    ring0 = compose(head0, nominal_inv)
    if opt.ring_offset is not None:
        ring0 = compose(ring0, opt.ring_offset)
    ur3_dt = 1.0 / sched.ur3_rate
    ur3 = RobotPlant(head0, ur3_dt, lat.ur3_delay, opt.ur3_limits)
    ur5 = RobotPlant(ring0, 1.0 / sched.ur5_rate, lat.robot_delay, opt.ur5_limits)

    d_ticks = int(round(lat.measurement_delay * enc_rate))
    rel0 = compose(inverse(ring0), head0)
    channels = EncoderChannel(inverse_kinematics(rel0, geom), t0=0.0, counts_per_mm=COUNTS_PER_MM)
    tracker = PoseTracker(geom, rel0)
    f_ex = AveragingFilter(lat.filter_window)
    f_exdot = AveragingFilter(lat.filter_window)

    # per-encoder-tick storage
    R = {k: np.zeros((n_enc, 3, 3)) for k in ("head", "ring", "rel", "meas")}
    P = {k: np.zeros((n_enc, 3)) for k in ("head", "ring", "rel", "meas")}
    tw = {k: np.zeros((n_enc, 6)) for k in ("head_twist", "ring_twist", "rel_true_twist",
                                             "rel_meas_twist", "ex_filt", "exdot_filt")}
    legs_true = np.zeros((n_enc, 6))
    rates_true = np.zeros((n_enc, 6))
    ur5_rows, ur3_rows, cam_frames, dropped = [], [], [], []

    exp_samples = max(1, int(round(rig.exposure * enc_rate))) + 1
    cam_ticks = set()
    f = 0
    while (k := int(round(f * enc_rate / sched.camera_rate))) < n_enc:
        cam_ticks.add(k)
        f += 1

    def encoder_block(k0: int, k1: int) -> None:
        # between plant steps both robots move at constant twist, so a block of
        # encoder ticks up to the next step can be evaluated at once
        ks = np.arange(k0, k1)
        tk = ks / enc_rate
        hR, ht = ur3.poses_at(tk)
        rR, rt = ur5.poses_at(tk)
        hv, rv = ur3.twist_vector, ur5.twist_vector
        relR = np.einsum("nji,njk->nik", rR, hR)
        relt = np.einsum("nji,nj->ni", rR, ht - rt)
        rel_v = np.einsum("nji,nj->ni", rR, hv[:3] - rv[:3] - cross(rv[3:] * DEG, ht - rt))
        rel_w = np.einsum("nji,j->ni", rR, hv[3:] - rv[3:])
        rel_tw = np.hstack([rel_v, rel_w])
        d = np.einsum("nij,kj->nki", relR, geom.platform_points) + (relt[:, None, :] - geom.base_points)
        legs_true[ks] = np.sqrt((d * d).sum(axis=2))
        src = np.maximum(ks - d_ticks, 0)
        legs_in = legs_true[src]
        if noise.encoder_noise_sd > 0:
            legs_in = legs_in + rng.normal(0.0, noise.encoder_noise_sd, legs_in.shape)
        if noise.encoder_quantization:
            l_meas = np.empty_like(legs_in)
            l_rates = np.empty_like(legs_in)
            for i in range(len(ks)):
                channels.update(legs_in[i], tk[i])
                l_meas[i] = channels.reading()
                l_rates[i] = channels.velocity(tk[i])
        else:
            rates_true[ks] = np.einsum("nij,nj->ni", leg_jacobians(relR, relt, geom), rel_tw)
            l_meas, l_rates = legs_in, rates_true[src]
        try:
            mR, mt, mtw = tracker.update_many(l_meas, l_rates)
        except (RuntimeError, ValueError) as exc:
            raise SimulationAborted(k0 + getattr(exc, "index", 0), exc) from exc
        ex = np.hstack([np.einsum("nij,j->ni", mR, nominal_inv.translation) + mt,
                        log_so3_array(mR @ nominal_inv.rotation) * RAD2DEG])
        for i, k in enumerate(ks):
            tw["ex_filt"][k] = f_ex.push(ex[i])
            tw["exdot_filt"][k] = f_exdot.push(mtw[i])
        R["head"][ks], P["head"][ks] = hR, ht
        R["ring"][ks], P["ring"][ks] = rR, rt
        R["rel"][ks], P["rel"][ks] = relR, relt
        R["meas"][ks], P["meas"][ks] = mR, mt
        tw["head_twist"][ks] = hv
        tw["ring_twist"][ks] = rv
        tw["rel_true_twist"][ks] = rel_tw
        tw["rel_meas_twist"][ks] = mtw
        if opt.camera_enabled:
            for k in ks:
                if k in cam_ticks:
                    lo = max(0, k - exp_samples + 1)
                    try:
                        coords = [project_lasers(Pose(R["rel"][i], P["rel"][i]), rig)
                                  for i in range(lo, k + 1)]
                    except RayMiss:
                        dropped.append(int(k))
                        continue
                    obs = camera_observe(np.arange(lo, k + 1) / enc_rate, np.array(coords), rig,
                                         quantize=noise.pixel_quantization,
                                         noise_sd=noise.camera_noise_sd, rng=rng)
                    cam_frames.append((int(k), obs))

    # plant events on the common clock; encoder ticks at an event time run first
    events = sorted(set(range(0, n_base + 1, ur5_div)) | set(range(0, n_base + 1, ur3_div)))
    k_next = 0
    for j in events:
        t = j / base
        k_end = j // enc_div + 1
        if k_end > k_next:
            encoder_block(k_next, k_end)
            k_next = k_end

        if j % ur3_div == 0:
            i = j // ur3_div
            x_m = ur3.pose_at(t)
            xdot_m = ur3.twist
            nxt = min(i + 1, len(traj) - 1)
            cmd = reproduction_command(traj.pose_at_index(nxt), traj.twist_at_index(i), x_m, xdot_m,
                                       opt.ur3_kp, ur3_dt)
            ur3.step(cmd, t)
            ur3_rows.append(np.concatenate([[t], traj.pose[nxt], traj.twist[i], cmd.to_vector(),
                                            xdot_m.to_vector()]))

        if j % ur5_div == 0 and opt.ur5_enabled:
            # latest filtered measurement (the encoder ticks at every ring-robot tick)
            ex_f = tw["ex_filt"][k_next - 1]
            exdot_f = tw["exdot_filt"][k_next - 1]
            rR = ur5.pose_at(t).rotation
            e_x = PoseError(rR @ ex_f[:3], rR @ exp_so3(ex_f[3:] * DEG) @ rR.T)
            e_xdot = Twist(rR @ exdot_f[:3], rR @ exdot_f[3:])
            xdot_m = ur5.twist
            cmd = coarse_command(e_x, e_xdot, xdot_m, gains)
            ur5.step(cmd, t)
            ur5_rows.append(np.concatenate([[t], cmd.to_vector(), xdot_m.to_vector(),
                                            [exp_gain(float(np.linalg.norm(ex_f[:3])), gains.delta_t_max),
                                             exp_gain(float(np.linalg.norm(ex_f[3:])), gains.delta_r_max)]]))
    if k_next < n_enc:
        encoder_block(k_next, n_enc)

    t_enc = np.arange(n_enc) / enc_rate
    encoder = {
        "t": t_enc,
        "head": _pose_vecs(R["head"], P["head"]),
        "head_twist": tw["head_twist"],
        "ring": _pose_vecs(R["ring"], P["ring"]),
        "ring_twist": tw["ring_twist"],
        "rel_true": _pose_vecs(R["rel"], P["rel"]),
        "rel_true_twist": tw["rel_true_twist"],
        "rel_meas": _pose_vecs(R["meas"], P["meas"]),
        "rel_meas_twist": tw["rel_meas_twist"],
        "ex_filt": tw["ex_filt"],
        "exdot_filt": tw["exdot_filt"],
    }

    cam_rows = []
    for k, obs in cam_frames:
        ka = k + d_ticks
        if ka >= n_enc:
            break
        recon = reconstruct_source(obs, rig)
        fine_motion_correct(recon, Pose(R["meas"][ka], P["meas"][ka]), rig.source)
        smear = obs.smear_extent[:, :, 1] - obs.smear_extent[:, :, 0]
        cam_rows.append(np.concatenate([[obs.t], obs.coords.ravel(), recon.p, [recon.gap],
                                        [recon.residual_after_correction],
                                        np.hypot(smear[:, 0], smear[:, 1]),
                                        obs.direction_change.astype(float)]))

    meta = {
        "duration": float(sched.duration),
        "encoder_rate": float(sched.encoder_rate),
        "ur5_rate": float(sched.ur5_rate),
        "ur3_rate": float(sched.ur3_rate),
        "camera_rate": float(sched.camera_rate),
        "measurement_delay": float(lat.measurement_delay),
        "filter_window": int(lat.filter_window),
        "robot_delay": float(lat.robot_delay),
        "ur3_delay": float(lat.ur3_delay),
        "nominal_pose": [float(v) for v in nominal.to_vector()],
        "ur5_enabled": bool(opt.ur5_enabled),
        "seed": int(seed),
        "camera_frames_dropped": len(dropped),
        "noise": asdict(noise),
        "gains": asdict(gains),
    }
    return SimLog(meta, encoder, _table("ur5", ur5_rows), _table("ur3", ur3_rows),
                  _table("camera", cam_rows))


def _table(name, rows):
    schema = SCHEMAS[name]
    width = len(_header(schema))
    data = np.array(rows).reshape(-1, width)
    tab, c = {}, 0
    for g, sub in schema:
        w = max(len(sub), 1)
        tab[g] = data[:, c] if not sub else data[:, c:c + w]
        c += w
    return tab


# --- lag estimation ----------------------------------------------------------------

def estimate_lag(reference, tracked, rate: float, max_lag: float = 0.2, min_corr: float = 0.5,
                 min_duration: float = 2.0) -> float:
    """Delay (s) by which ``tracked`` follows ``reference``.

    Pearson correlation of ``reference[:n-k]`` with ``tracked[k:]`` for
    every lag ``k`` from 0 to ``max_lag``; the best integer lag is refined
    by a parabola fitted to the correlation around it.

    Raises
    ------
    LowCorrelation
        Peak correlation below ``min_corr`` (or undefined, e.g. constant input).
    """
    a = np.asarray(reference, dtype=float)
    b = np.asarray(tracked, dtype=float)
    n = min(len(a), len(b))
    if n < min_duration * rate - 1e-9:
        raise ValueError(f"need at least {min_duration} s of data")
    a, b = a[:n], b[:n]
    kmax = min(int(round(max_lag * rate)), n - 2)
    corr = np.full(kmax + 1, -np.inf)
    for k in range(kmax + 1):
        x = a[:n - k] - a[:n - k].mean()
        y = b[k:] - b[k:].mean()
        den = math.sqrt(float(x @ x) * float(y @ y))
        if den > 0:
            corr[k] = float(x @ y) / den
    k = int(np.argmax(corr))
    peak = corr[k]
    if not np.isfinite(peak) or peak < min_corr:
        raise LowCorrelation(f"peak correlation {peak:.3f} below {min_corr}")
    # Least-squares parabola over the lags within 1% of the peak (at most
    # 10 ms each side).  A three-point parabola suffices for clean signals,
    # but with broadband noise the second difference of the correlation is
    # mostly noise.
    h = 0
    cap = min(k, kmax - k, max(1, int(round(0.01 * rate))))
    while h < cap and min(corr[k - h - 1], corr[k + h + 1]) >= peak - 0.01 * abs(peak):
        h += 1
    h = max(h, min(1, cap))
    shift = 0.0
    if h >= 1 and np.all(np.isfinite(corr[k - h:k + h + 1])):
        x = np.arange(-h, h + 1, dtype=float)
        c2, c1, _ = np.polyfit(x, corr[k - h:k + h + 1], 2)
        if c2 < 0:
            shift = float(np.clip(-0.5 * c1 / c2, -h, h))
    return (k + shift) / rate


# --- metrics -----------------------------------------------------------------

@dataclass
class Metrics:
    xy_error_max: float
    xy_error_mean: float
    xyz_error_max: float
    xyz_error_mean: float
    rot_error_max: float
    rot_error_mean: float
    lag_typical: float
    lag_max: float
    measurement_error_mean: float
    measurement_error_sd: float
    velocity_error_mean: float
    velocity_error_sd: float
    recon_residual_mean: float
    recon_residual_sd: float
    clearance_min: float

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _dominant(arr):
    return int(np.argmax(np.var(arr, axis=0)))


def _aligned_error(t, truth, measured, lag):
    """Norm of ``measured(t + lag) - truth(t)`` over the samples where both exist."""
    keep = t + lag <= t[-1] + 1e-12
    shifted = np.column_stack([np.interp(t[keep] + lag, t, measured[:, c]) for c in range(measured.shape[1])])
    return np.linalg.norm(shifted - truth[keep], axis=1)


def _lag_or(ref, trk, rate, fallback):
    if np.ptp(ref) < 1e-9 and np.ptp(trk) < 1e-9:
        return 0.0
    try:
        return estimate_lag(ref, trk, rate)
    except ValueError:  # low correlation or too little data
        return fallback


def window_lags(reference, tracked, rate: float, window: float = 2.0, hop: float = 1.0) -> np.ndarray:
    """Lag estimates over sliding windows; windows with low correlation are skipped."""
    n = len(reference)
    w, h = int(round(window * rate)), int(round(hop * rate))
    out = []
    for s in range(0, n - w + 1, h):
        try:
            out.append(estimate_lag(reference[s:s + w], tracked[s:s + w], rate))
        except LowCorrelation:
            continue
    return np.array(out)


def compute_metrics(log: SimLog, skip_initial: float = 1.0) -> Metrics:
    """Tracking, latency, measurement and reconstruction statistics of a run.

    Errors use the helmet pose relative to the ring, minus the nominal
    pose; the x-y norm is taken in the ring plane where the clearance
    applies.  Samples before ``skip_initial`` are excluded.
    """
    enc = log.encoder
    rate = float(log.meta["encoder_rate"])
    t = enc["t"]
    if t[-1] <= skip_initial:
        raise ValueError("log is shorter than the skipped initial interval")
    m = t >= skip_initial - 1e-12
    nominal = Pose.from_vector(log.meta["nominal_pose"])

    rel_R = rotations_from_euler_array(enc["rel_true"][m, 3:])
    d = enc["rel_true"][m, :3] - nominal.translation
    xy = np.linalg.norm(d[:, :2], axis=1)
    xyz = np.linalg.norm(d, axis=1)
    rot = rotation_angles_array(rel_R @ nominal.rotation.T)

    head = enc["head"][m, :3]
    ring = enc["ring"][m, :3]
    if log.meta.get("ur5_enabled", True):
        ax = _dominant(head[:, :2])
        ref, trk = head[:, ax], ring[:, ax]
        if np.ptp(ref) < 1e-9 and np.ptp(trk) < 1e-9:
            lag_typ = lag_max = 0.0
        else:
            lags = window_lags(ref, trk, rate)
            if len(lags):
                lag_typ, lag_max = float(np.median(lags)), float(np.max(lags))
            else:
                lag_typ = lag_max = float("nan")
    else:
        lag_typ = lag_max = float("nan")

    tm = t[m]
    truth = enc["rel_true"][m, :3]
    meas = enc["rel_meas"][m, :3]
    ax = _dominant(truth)
    lag_p = _lag_or(truth[:, ax], meas[:, ax], rate, float(log.meta["measurement_delay"]))
    perr = _aligned_error(tm, truth, meas, lag_p)

    vtrue = enc["rel_true_twist"][m, :3]
    vfilt = enc["exdot_filt"][m, :3]
    axv = _dominant(vtrue)
    fallback = float(log.meta["measurement_delay"]) + 0.5 * (int(log.meta["filter_window"]) - 1) / rate
    lag_v = _lag_or(vtrue[:, axv], vfilt[:, axv], rate, fallback)
    verr = _aligned_error(tm, vtrue, vfilt, lag_v)

    cam = log.camera
    cm = cam["t"] >= skip_initial - 1e-12
    res = cam["residual"][cm]
    r_mean = float(np.mean(res)) if len(res) else float("nan")
    r_sd = float(np.std(res)) if len(res) else float("nan")

    return Metrics(
        xy_error_max=float(xy.max()), xy_error_mean=float(xy.mean()),
        xyz_error_max=float(xyz.max()), xyz_error_mean=float(xyz.mean()),
        rot_error_max=float(rot.max()), rot_error_mean=float(rot.mean()),
        lag_typical=lag_typ, lag_max=lag_max,
        measurement_error_mean=float(perr.mean()), measurement_error_sd=float(perr.std()),
        velocity_error_mean=float(verr.mean()), velocity_error_sd=float(verr.std()),
        recon_residual_mean=r_mean, recon_residual_sd=r_sd,
        clearance_min=CLEARANCE_MM - float(xy.max()),
    )


# --- ramp latency test ---------------------------------------------------------

@dataclass
class RampResult:
    t: np.ndarray
    desired: np.ndarray
    measured: np.ndarray
    command: np.ndarray
    executed: np.ndarray
    lag: float


def run_ramp_test(speed: float = 80.0, distance: float = 200.0, axis="x", k_p: float = 3.0,
                  rate: float = 60.0, robot_delay: float = 0.016, limits: PlantLimits | None = None,
                  sample_rate: float = 1000.0) -> RampResult:
    """Drive one robot through a ramp with the reproduction controller.

    Commanded and executed velocity along the ramp axis are held between
    control ticks and resampled at ``sample_rate``; their lag is the robot
    motion latency.
    """
    traj = generate_ramp(speed, distance, axis, rate)
    k = "xyz".index(axis) if isinstance(axis, str) else int(axis)
    dt = 1.0 / rate
    plant = RobotPlant(traj.pose_at_index(0), dt, robot_delay,
                       limits or PlantLimits(500.0, 120.0, 5000.0, 2000.0))
    n = len(traj)
    cmds = np.zeros(n)
    execd = np.zeros(n)
    pos = np.zeros(n)
    for i in range(n):
        ti = i * dt
        x_m = plant.pose_at(ti)
        pos[i] = x_m.translation[k]
        nxt = min(i + 1, n - 1)
        cmd = reproduction_command(traj.pose_at_index(nxt), traj.twist_at_index(i), x_m, plant.twist,
                                   k_p, dt)
        plant.step(cmd, ti)
        cmds[i] = cmd.linear[k]
        execd[i] = plant.twist_vector[k]
    ts = np.arange(int(math.floor(traj.t[-1] * sample_rate)) + 1) / sample_rate
    idx = np.minimum(np.floor(ts * rate + 1e-9).astype(int), n - 1)
    lag = estimate_lag(cmds[idx], execd[idx], sample_rate)
    return RampResult(traj.t, traj.pose[:, k], pos, cmds, execd, lag)
