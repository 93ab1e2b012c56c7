"""Laser scanline preprocessing: jump-edge removal, undistortion, assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

RANGE_MIN = 0.1
RANGE_MAX = 30.0


@dataclass
class ScanLine:
    """One 2D sweep of the spinning laser.

    Beam ``i`` points along ``beam_angles[i]`` inside the scan plane; the
    plane itself is rotated about the sensor's vertical axis, from
    ``rot_start`` at the first beam to ``rot_end`` at the last.
    """

    timestamp: float
    rot_start: float            # sensor rotation angle (rad) at first beam
    rot_end: float              # at last beam
    beam_angles: np.ndarray     # (N,) rad within the scan plane
    ranges: np.ndarray          # (N,) m
    valid: np.ndarray = field(default=None)  # (N,) bool

    def __post_init__(self):
        self.beam_angles = np.asarray(self.beam_angles, dtype=float)
        self.ranges = np.asarray(self.ranges, dtype=float)
        if self.valid is None:
            self.valid = (self.ranges > RANGE_MIN) & (self.ranges <= RANGE_MAX)
        self.valid = np.asarray(self.valid, dtype=bool)


def default_beam_angles(n: int = 1080, fov_deg: float = 270.0) -> np.ndarray:
    half = np.deg2rad(fov_deg) / 2
    return np.linspace(-half, half, n)


def _plane_points(line: ScanLine) -> np.ndarray:
    """2D returns as 3D points in the (un-rotated) scan plane, x-z convention.

    The scan plane is vertical: beam angle 0 points along +x, positive angles
    tilt toward +z.
    """
    c = np.cos(line.beam_angles)
    s = np.sin(line.beam_angles)
    return np.stack([line.ranges * c, np.zeros_like(c), line.ranges * s], axis=1)


def filter_jump_edges(line: ScanLine, theta_min: float = np.deg2rad(10.0)) -> ScanLine:
    """Invalidate beams at occlusion boundaries.

    A pair of neighboring returns whose connecting segment is nearly parallel
    to the viewing ray (angle below ``theta_min``) is a jump edge; both beams
    are invalidated.
    """
    pts = _plane_points(line)
    keep = line.valid.copy()
    seg = pts[1:] - pts[:-1]
    seg_norm = np.linalg.norm(seg, axis=1)
    ray_norm = np.linalg.norm(pts[:-1], axis=1)
    ok = line.valid[:-1] & line.valid[1:] & (seg_norm > 0) & (ray_norm > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.abs(np.sum(seg * pts[:-1], axis=1) / (seg_norm * ray_norm))
    # angle between segment and viewing ray, folded to [0, pi/2]
    angle = np.arccos(np.clip(cosang, -1.0, 1.0))
    jump = ok & (angle < theta_min)
    keep[:-1] &= ~jump
    keep[1:] &= ~jump
    out = ScanLine(
        line.timestamp, line.rot_start, line.rot_end,
        line.beam_angles, line.ranges, keep,
    )
    return out


def undistort_line(line: ScanLine) -> np.ndarray:
    """Return (N, 3) points in the sensor-base frame.

    The sensor rotation advances during the sweep; the rotation between the
    start and end angle is distributed over the beams by slerp.
    """
    n = len(line.ranges)
    pts = _plane_points(line)
    r0 = Rotation.from_euler("z", line.rot_start)
    r1 = Rotation.from_euler("z", line.rot_end)
    if n == 1:
        return r0.apply(pts)
    slerp = Slerp([0.0, 1.0], Rotation.concatenate([r0, r1]))
    rots = slerp(np.arange(n) / (n - 1))
    return rots.apply(pts)


class TimelineGapError(RuntimeError):
    def __init__(self, t0, t1):
        super().__init__(f"pose timeline does not cover [{t0:.4f}, {t1:.4f}] s")
        self.interval = (t0, t1)


class PoseTimeline:
    """Time-indexed 6D sensor poses, queried by interpolation."""

    def __init__(self, times, positions, quats_wxyz):
        times = np.asarray(times, dtype=float)
        if len(times) < 1 or np.any(np.diff(times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        self.times = times
        self.positions = np.asarray(positions, dtype=float)
        q = np.asarray(quats_wxyz, dtype=float)
        self._rots = Rotation.from_quat(q[:, [1, 2, 3, 0]])  # scipy is xyzw
        self._slerp = Slerp(times, self._rots) if len(times) > 1 else None

    @property
    def t_min(self):
        return self.times[0]

    @property
    def t_max(self):
        return self.times[-1]

    def pose_at(self, t: float):
        """(position, Rotation) at time t; raises TimelineGapError outside."""
        if t < self.t_min or t > self.t_max:
            raise TimelineGapError(t, t)
        p = np.array(
            [np.interp(t, self.times, self.positions[:, k]) for k in range(3)]
        )
        rot = self._rots[0] if self._slerp is None else self._slerp(t)
        return p, rot


def assemble_scan(lines, timeline: PoseTimeline):
    """Assemble the 2D lines of one sensor rotation into one odom-frame cloud.

    Each line is undistorted, then rigidly transformed by the interpolated
    sensor pose at its timestamp.  Returns (points (M, 3), stamp) where the
    stamp is the rotation-end time.
    """
    if not lines:
        return np.empty((0, 3)), None
    t0 = min(l.timestamp for l in lines)
    t1 = max(l.timestamp for l in lines)
    if t0 < timeline.t_min or t1 > timeline.t_max:
        raise TimelineGapError(t0, t1)
    chunks = []
    for line in lines:
        pts = undistort_line(line)[line.valid]
        if len(pts) == 0:
            continue
        p, rot = timeline.pose_at(line.timestamp)
        chunks.append(rot.apply(pts) + p)
    if not chunks:
        return np.empty((0, 3)), t1
    return np.vstack(chunks), t1
