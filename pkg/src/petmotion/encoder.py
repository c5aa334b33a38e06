"""Quadrature counting and edge-timed velocity for string encoders.

A channel object may hold one string or a bank of strings (all fields are
then arrays of the same shape).  Counting is incremental, as on the real
hardware: the reading is ``home_length + (count - home_count) / counts_per_mm``
so a channel homed at a known length reads that length back exactly.
"""
from __future__ import annotations

import numpy as np

COUNTS_PER_MM = 60.0


def quantize(length, counts_per_mm: float = COUNTS_PER_MM):
    """Absolute quadrature count ``floor(length * counts_per_mm)``."""
    c = np.floor(np.asarray(length, dtype=float) * counts_per_mm).astype(np.int64)
    return int(c) if c.ndim == 0 else c


class EncoderChannel:
    """Counter, edge timer and index latch for one or more strings.

    Parameters
    ----------
    home_length : float or array
        Length (mm) at which the counter is homed; also the initial length.
    t0 : float
        Time of homing (s).
    counts_per_mm : float
        Quadrature resolution.
    index_pitch_mm : float, optional
        Spacing of index pulses along the string; ``None`` disables them.
    """

    def __init__(self, home_length, t0: float = 0.0, counts_per_mm: float = COUNTS_PER_MM,
                 index_pitch_mm: float | None = None):
        if counts_per_mm <= 0:
            raise ValueError("counts_per_mm must be positive")
        self.counts_per_mm = float(counts_per_mm)
        self.home_length = np.array(home_length, dtype=float)
        self.length = self.home_length.copy()
        self.home_count = np.floor(self.home_length * self.counts_per_mm).astype(np.int64)
        self.count = self.home_count.copy()
        shape = self.count.shape
        self.t = float(t0)
        self.last_edge_time = np.full(shape, np.nan)
        self.prev_edge_interval = np.zeros(shape)
        self.last_dir = np.zeros(shape, dtype=np.int64)
        self.edges_seen = np.zeros(shape, dtype=np.int64)
        self.index_pitch = None if index_pitch_mm is None else int(round(index_pitch_mm * counts_per_mm))
        self.index_latch = np.zeros(shape, dtype=np.int64)

    def reading(self):
        """Measured length in mm from the incremental count."""
        return self.home_length + (self.count - self.home_count) / self.counts_per_mm

    def update(self, length, t: float) -> None:
        """Advance to time ``t`` with the string now at ``length``.

        Length is taken to vary linearly since the previous update, which
        places each count edge at its crossing time.  Only the last two edges
        matter for the estimator, so they are computed in closed form.
        """
        length = np.asarray(length, dtype=float)
        cpm = self.counts_per_mm
        new_count = np.floor(length * cpm).astype(np.int64)
        dc = new_count - self.count
        moved = dc != 0
        if np.any(moved):
            dt = t - self.t
            dl = length - self.length
            with np.errstate(divide="ignore", invalid="ignore"):
                # edge at level k/cpm raises the count to k going up, lowers it to k-1 going down
                last_level = np.where(dc > 0, new_count, new_count + 1) / cpm
                t_last = self.t + (last_level - self.length) / dl * dt
                prev_level = np.where(dc > 0, new_count - 1, new_count + 2) / cpm
                t_prev = self.t + (prev_level - self.length) / dl * dt
                many = np.abs(dc) >= 2
                interval = np.where(many, t_last - t_prev, t_last - self.last_edge_time)
            direction = np.sign(dc)
            have_interval = many | (self.edges_seen > 0)
            self.prev_edge_interval = np.where(moved & have_interval, interval, self.prev_edge_interval)
            self.last_edge_time = np.where(moved, t_last, self.last_edge_time)
            self.last_dir = np.where(moved, direction, self.last_dir)
            self.edges_seen = self.edges_seen + np.abs(dc)
            if self.index_pitch:
                lo = np.minimum(self.count, new_count)
                hi = np.maximum(self.count, new_count)
                crossed = (hi // self.index_pitch) > (lo // self.index_pitch)
                self.index_latch = np.where(crossed, (hi // self.index_pitch) * self.index_pitch,
                                            self.index_latch)
        self.count = new_count
        self.length = length
        self.t = float(t)

    def velocity(self, now: float | None = None):
        return velocity_from_edges(self, self.t if now is None else now)


def velocity_from_edges(channel: EncoderChannel, now: float):
    """Edge-timed speed estimate in mm/s.

    One count over the last edge interval, signed by the direction of the
    last edge.  Once the time since the last edge exceeds that interval the
    estimate uses the elapsed time instead, so it decays toward zero when
    motion stops.  Zero until two edges have been observed.
    """
    step = 1.0 / channel.counts_per_mm
    interval = channel.prev_edge_interval
    since = now - channel.last_edge_time
    with np.errstate(divide="ignore", invalid="ignore"):
        dt = np.where(since > interval, since, interval)
        v = channel.last_dir * step / dt
    v = np.where((channel.edges_seen >= 2) & (dt > 0), v, 0.0)
    return float(v) if np.ndim(v) == 0 else v
