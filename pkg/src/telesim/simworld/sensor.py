"""Spinning 2D laser: raycast scanlines against the heightfield terrain.

The scanner sweeps a vertical fan of beams (default 1080 over 270 degrees)
while the fan plane rotates continuously about the vertical axis.  Each
scanline therefore spans a small rotation interval; beam directions use the
interpolated rotation, which is exactly what the undistortion on the
mapping side assumes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from telesim.mapping import ScanLine, default_beam_angles
from .terrain import Terrain

LINE_RATE = 40.0          # scanlines per second
ROT_RATE = 0.5            # sensor rotations per second
RANGE_MAX = 30.0
RANGE_MIN = 0.1
NOISE_SIGMA = 0.01        # m


@njit(cache=True)
def _raycast(heights, ox, oy, res, origin, dirs, r_max):
    """First terrain intersection along each ray; 0 marks no return."""
    h, w = heights.shape
    n = len(dirs)
    out = np.zeros(n)
    coarse = 0.05
    for k in range(n):
        dx, dy, dz = dirs[k]
        if dz >= -1e-9:
            continue  # flat/upward beams never hit the heightfield
        lo = 0.0
        hit = -1.0
        t = RANGE_MIN
        while t <= r_max:
            px = origin[0] + t * dx
            py = origin[1] + t * dy
            pz = origin[2] + t * dz
            j = int(np.floor((px - ox) / res + 0.5))
            i = int(np.floor((py - oy) / res + 0.5))
            hz = heights[i, j] if (0 <= i < h and 0 <= j < w) else 0.0
            if pz <= hz:
                hit = t
                break
            lo = t
            t += coarse
        if hit < 0:
            continue
        # bisect between the last free sample and the hit
        hi_t = hit
        for _ in range(25):
            mid = 0.5 * (lo + hi_t)
            px = origin[0] + mid * dx
            py = origin[1] + mid * dy
            pz = origin[2] + mid * dz
            j = int(np.floor((px - ox) / res + 0.5))
            i = int(np.floor((py - oy) / res + 0.5))
            hz = heights[i, j] if (0 <= i < h and 0 <= j < w) else 0.0
            if pz <= hz:
                hi_t = mid
            else:
                lo = mid
        out[k] = 0.5 * (lo + hi_t)
    return out


def raycast_scanline(terrain: Terrain, sensor_origin, sensor_yaw: float,
                     timestamp: float, n_beams: int = 1080,
                     fov_deg: float = 270.0, rot_rate: float = ROT_RATE,
                     line_rate: float = LINE_RATE,
                     sigma: float = NOISE_SIGMA, seed: int = 0) -> ScanLine:
    """One scanline at ``timestamp`` from a sensor at ``sensor_origin``.

    The fan plane angle advances by ``rot_rate`` rotations per second; the
    line's rotation interval is [angle(t), angle(t + 1/line_rate)].  Range
    noise is Gaussian with deterministic per-line seeding.
    """
    beam_angles = default_beam_angles(n_beams, fov_deg)
    rot_start = 2 * np.pi * rot_rate * timestamp
    rot_end = 2 * np.pi * rot_rate * (timestamp + 1.0 / line_rate)
    frac = (np.arange(n_beams) / max(n_beams - 1, 1))
    rot = sensor_yaw + rot_start + frac * (rot_end - rot_start)
    ca, sa = np.cos(beam_angles), np.sin(beam_angles)
    cr, sr = np.cos(rot), np.sin(rot)
    dirs = np.stack([cr * ca, sr * ca, sa], axis=1)
    ranges = _raycast(terrain.heights, terrain.origin[0], terrain.origin[1],
                      terrain.resolution, np.asarray(sensor_origin, float),
                      dirs, RANGE_MAX)
    if sigma > 0:
        rng = np.random.default_rng((seed, int(round(timestamp * line_rate))))
        noise = rng.normal(0.0, sigma, n_beams)
        ranges = np.where(ranges > 0, ranges + noise, 0.0)
    valid = (ranges > RANGE_MIN) & (ranges <= RANGE_MAX)
    return ScanLine(timestamp, rot_start, rot_end, beam_angles,
                    ranges, valid)
