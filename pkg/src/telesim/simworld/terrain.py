"""Scenario terrains as gridded heightfields with nearest-cell lookup.

Nearest-cell sampling keeps step edges (bars, stair risers) crisp, which
matters for obstacle detection tests; everything outside the arena is flat
ground at z = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCENARIOS = ("flat", "bar", "stairs", "debris", "rough")

BAR_SIZE = (0.20, 1.54, 0.155)    # depth (x), length (y), height
BAR_X = 1.20                      # near edge ahead of the start pose
STAIR_RISE = 0.18
STAIR_RUN = 0.28
STAIR_X = 2.0
STAIR_COUNT = 5


class ScenarioError(ValueError):
    pass


@dataclass
class Terrain:
    name: str
    heights: np.ndarray       # (H, W) z values
    resolution: float
    origin: np.ndarray        # world XY of cell [0, 0] center

    @property
    def extent(self):
        h, w = self.heights.shape
        return (w * self.resolution, h * self.resolution)

    def height(self, x, y):
        """Terrain height via nearest-cell lookup; flat outside the arena."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        j = np.round((x - self.origin[0]) / self.resolution).astype(np.int64)
        i = np.round((y - self.origin[1]) / self.resolution).astype(np.int64)
        h, w = self.heights.shape
        inside = (i >= 0) & (i < h) & (j >= 0) & (j < w)
        out = np.zeros(np.broadcast(x, y).shape)
        if out.ndim == 0:
            return float(self.heights[i, j]) if inside else 0.0
        out[inside] = self.heights[i[inside], j[inside]]
        return out


def _empty(extent: float, resolution: float):
    n = int(round(2 * extent / resolution))
    heights = np.zeros((n, n))
    origin = np.array([-(n - 1) / 2 * resolution, -(n - 1) / 2 * resolution])
    return heights, origin


def make_terrain(name: str, seed: int = 0, extent: float = 12.0,
                 resolution: float = 0.02) -> Terrain:
    """Build one of the named scenario terrains."""
    if name not in SCENARIOS:
        raise ScenarioError(
            f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    heights, origin = _empty(extent, resolution)
    n = heights.shape[0]
    x = origin[0] + np.arange(n) * resolution
    y = origin[1] + np.arange(n) * resolution
    X, Y = np.meshgrid(x, y)
    if name == "bar":
        depth, length, h = BAR_SIZE
        mask = ((X >= BAR_X) & (X <= BAR_X + depth)
                & (np.abs(Y) <= length / 2))
        heights[mask] = h
    elif name == "stairs":
        tread = np.clip(np.floor((X - STAIR_X) / STAIR_RUN) + 1,
                        0, STAIR_COUNT)
        heights[:] = tread * STAIR_RISE
    elif name == "debris":
        rng = np.random.default_rng(seed)
        for _ in range(60):
            cx, cy = rng.uniform(-extent + 1, extent - 1, 2)
            sx, sy = rng.uniform(0.1, 0.5, 2)
            h = rng.uniform(0.01, 0.05)
            mask = (np.abs(X - cx) <= sx / 2) & (np.abs(Y - cy) <= sy / 2)
            heights[mask] = np.maximum(heights[mask], h)
    elif name == "rough":
        rng = np.random.default_rng(seed)
        coarse = rng.normal(0.0, 1.0, (n // 16 + 2, n // 16 + 2))
        from scipy import ndimage
        smooth = ndimage.zoom(coarse, n / coarse.shape[0], order=3)[:n, :n]
        smooth -= smooth.min()
        heights[:] = smooth / smooth.max() * 0.10
    if not np.all(np.isfinite(heights)):
        raise ScenarioError(f"terrain {name!r} has non-finite heights")
    return Terrain(name, heights, resolution, origin)
