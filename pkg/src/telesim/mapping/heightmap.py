"""Robot-centered 2.5D heightmap: projection, gap filling, median filtering.

The heightmap is a regular XY raster; each cell holds the median z of the
points that fall into its column.  Gaps inside the measured area are filled
with the minimum valid height within a small disk (a conservative estimate
for unobserved ground), and a sliding-window median filter suppresses
point outliers.  The median filter slides an incremental height histogram
along each row, adding/removing one window column per step, which keeps the
per-cell cost proportional to the window edge instead of its area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

PROV_MEASURED = 0
PROV_GAPFILL = 1


@dataclass
class HeightMap:
    heights: np.ndarray          # (H, W) float, NaN where invalid
    valid: np.ndarray            # (H, W) bool
    origin: np.ndarray           # world XY of cell [0, 0] center
    resolution: float
    provenance: np.ndarray = field(default=None)  # (H, W) uint8

    def __post_init__(self):
        if self.provenance is None:
            self.provenance = np.zeros(self.heights.shape, dtype=np.uint8)

    @property
    def shape(self):
        return self.heights.shape

    def cell_index(self, xy) -> tuple[int, int]:
        xy = np.asarray(xy, dtype=float)
        ij = np.round((xy - self.origin) / self.resolution).astype(int)
        return int(ij[1]), int(ij[0])  # row (y), col (x)

    def height_at(self, xy) -> float:
        i, j = self.cell_index(xy)
        h, w = self.heights.shape
        if not (0 <= i < h and 0 <= j < w) or not self.valid[i, j]:
            return np.nan
        return float(self.heights[i, j])


def project_heightmap(source, center_xy=None, extent: float = 8.0,
                      resolution: float = 0.05, stat: str = "median") -> HeightMap:
    """Rasterize a map (or raw point cloud) into per-column heights.

    ``source`` is a MultiResGrid or an (N, 3) point array.  The raster spans
    ``extent`` meters on each side, centered at ``center_xy`` (defaults to
    the grid center); columns with no points are invalid.  The column
    statistic is the median of z (robust to stray returns) or, with
    ``stat="max"``, the maximum.
    """
    if hasattr(source, "all_points"):
        points = source.all_points()
        if center_xy is None:
            center_xy = source.center[:2]
    else:
        points = source
    if center_xy is None:
        center_xy = (0.0, 0.0)
    if stat not in ("median", "max"):
        raise ValueError("stat must be 'median' or 'max'")
    n = int(round(extent / resolution))
    center_xy = np.asarray(center_xy, dtype=float)
    origin = center_xy - (n - 1) / 2.0 * resolution
    heights = np.full((n, n), np.nan)
    valid = np.zeros((n, n), dtype=bool)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts):
        ij = np.round((pts[:, :2] - origin) / resolution).astype(np.int64)
        ok = np.all((ij >= 0) & (ij < n), axis=1)
        ij, z = ij[ok], pts[ok, 2]
        if len(z):
            flat = ij[:, 1] * n + ij[:, 0]
            order = np.lexsort((z, flat))
            flat, z = flat[order], z[order]
            starts = np.concatenate([[0], np.flatnonzero(np.diff(flat)) + 1])
            ends = np.concatenate([starts[1:], [len(flat)]])
            counts = ends - starts
            if stat == "median":
                # lower median of each sorted group
                med = z[starts + (counts - 1) // 2]
            else:
                med = z[ends - 1]
            rows = flat[starts] // n
            cols = flat[starts] % n
            heights[rows, cols] = med
            valid[rows, cols] = True
    return HeightMap(heights, valid, origin, resolution)


def _disk_footprint(radius_cells: int) -> np.ndarray:
    r = radius_cells
    y, x = np.mgrid[-r:r + 1, -r:r + 1]
    return (x * x + y * y) <= r * r


def fill_gaps(hm: HeightMap, radius: float = 0.10) -> HeightMap:
    """Fill invalid cells with the minimum valid height within ``radius``.

    Cells with no valid neighbor in range stay invalid.  Filled cells are
    marked in the provenance raster.
    """
    r = max(1, int(round(radius / hm.resolution)))
    fp = _disk_footprint(r)
    padded = np.where(hm.valid, hm.heights, np.inf)
    low = ndimage.minimum_filter(padded, footprint=fp, mode="constant", cval=np.inf)
    fillable = ~hm.valid & np.isfinite(low)
    heights = hm.heights.copy()
    heights[fillable] = low[fillable]
    prov = hm.provenance.copy()
    prov[fillable] = PROV_GAPFILL
    return HeightMap(heights, hm.valid | fillable, hm.origin.copy(),
                     hm.resolution, prov)


def merge_heightmaps(base: HeightMap, update: HeightMap) -> HeightMap:
    """Latest-wins fusion: update's valid cells override, the rest carry over.

    The result uses the update's window.  Both maps must share resolution
    and sit on the same cell lattice (origins differing by whole cells), so
    the carry-over is a pure index shift with no resampling.
    """
    if base is None:
        return update
    if abs(base.resolution - update.resolution) > 1e-12:
        raise ValueError("heightmap resolutions differ")
    off = (update.origin - base.origin) / update.resolution
    k = np.round(off).astype(int)
    if np.max(np.abs(off - k)) > 1e-6:
        raise ValueError("heightmap lattices are not aligned")
    heights = update.heights.copy()
    valid = update.valid.copy()
    prov = update.provenance.copy()
    h, w = update.heights.shape
    hb, wb = base.heights.shape
    # overlap of the update window with the base window, in update indices
    i0, i1 = max(0, -k[1]), min(h, hb - k[1])
    j0, j1 = max(0, -k[0]), min(w, wb - k[0])
    if i0 < i1 and j0 < j1:
        bi = slice(i0 + k[1], i1 + k[1])
        bj = slice(j0 + k[0], j1 + k[0])
        ui = slice(i0, i1)
        uj = slice(j0, j1)
        carry = base.valid[bi, bj] & ~update.valid[ui, uj]
        heights[ui, uj] = np.where(carry, base.heights[bi, bj],
                                   heights[ui, uj])
        valid[ui, uj] |= carry
        prov[ui, uj] = np.where(carry, base.provenance[bi, bj], prov[ui, uj])
    return HeightMap(heights, valid, update.origin.copy(), update.resolution,
                     prov)


@njit(cache=True)
def _median_hist(q, valid, half, nbins):
    h, w = q.shape
    out = np.zeros((h, w), dtype=np.int32)
    out_valid = np.zeros((h, w), dtype=np.bool_)
    hist = np.zeros(nbins, dtype=np.int32)
    for i in range(h):
        i0 = max(0, i - half)
        i1 = min(h, i + half + 1)
        hist[:] = 0
        count = 0
        # prime histogram with the window around column 0
        for jj in range(0, min(w, half + 1)):
            for ii in range(i0, i1):
                if valid[ii, jj]:
                    hist[q[ii, jj]] += 1
                    count += 1
        for j in range(w):
            if count > 0:
                need = (count + 1) // 2
                acc = 0
                for b in range(nbins):
                    acc += hist[b]
                    if acc >= need:
                        out[i, j] = b
                        out_valid[i, j] = True
                        break
            # slide: drop column j - half, add column j + half + 1
            jl = j - half
            if jl >= 0:
                for ii in range(i0, i1):
                    if valid[ii, jl]:
                        hist[q[ii, jl]] -= 1
                        count -= 1
            jr = j + half + 1
            if jr < w:
                for ii in range(i0, i1):
                    if valid[ii, jr]:
                        hist[q[ii, jr]] += 1
                        count += 1
    return out, out_valid


def median_filter_hist(hm: HeightMap, window: int = 5,
                       quant: float = 0.01) -> HeightMap:
    """Sliding-window median over valid cells, heights quantized to ``quant``.

    The lower median is used (for window values {1,2,3,4,100} the result
    is 3).  Windows are clipped at the borders; cells whose window holds
    no valid value stay invalid.
    """
    if window % 2 != 1 or window < 1:
        raise ValueError("window must be odd and positive")
    half = window // 2
    heights = hm.heights.copy()
    out_valid = hm.valid.copy()
    if hm.valid.any():
        hmin = float(np.nanmin(hm.heights[hm.valid]))
        q = np.zeros(hm.heights.shape, dtype=np.int32)
        q[hm.valid] = np.round((hm.heights[hm.valid] - hmin) / quant).astype(np.int32)
        nbins = int(q.max()) + 1
        med, out_valid = _median_hist(q, hm.valid, half, nbins)
        heights = np.where(out_valid, med * quant + hmin, np.nan)
    return HeightMap(heights, out_valid, hm.origin.copy(), hm.resolution,
                     hm.provenance.copy())


def median_filter_naive(hm: HeightMap, window: int = 5,
                        quant: float = 0.01) -> HeightMap:
    """Reference implementation of median_filter_hist via sorted windows."""
    half = window // 2
    h, w = hm.heights.shape
    heights = np.full((h, w), np.nan)
    valid = np.zeros((h, w), dtype=bool)
    if hm.valid.any():
        hmin = float(np.nanmin(hm.heights[hm.valid]))
        q = np.round((hm.heights - hmin) / quant)
        for i in range(h):
            for j in range(w):
                bi0, bi1 = max(0, i - half), min(h, i + half + 1)
                bj0, bj1 = max(0, j - half), min(w, j + half + 1)
                vals = q[bi0:bi1, bj0:bj1][hm.valid[bi0:bi1, bj0:bj1]]
                if len(vals):
                    vals = np.sort(vals)
                    heights[i, j] = vals[(len(vals) - 1) // 2] * quant + hmin
                    valid[i, j] = True
    return HeightMap(heights, valid, hm.origin.copy(), hm.resolution,
                     hm.provenance.copy())
