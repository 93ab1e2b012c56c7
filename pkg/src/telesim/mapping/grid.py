"""Egocentric multiresolution grid with ring-buffered cells.

Each level is an n x n x n window of cells of edge length c0 * 2^level,
aligned to a global lattice.  The window is realized as modular (ring)
index arithmetic: shifting moves only the integer window origin, and
cells falling outside are invalidated lazily by a stored-coordinate check,
so no point data is ever copied on shift.  Sub-cell translations accumulate
per axis and are applied once they exceed a cell length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    levels: int = 4
    cells: int = 16              # n, per axis
    base_cell: float = 0.25      # m, finest level edge length
    cell_capacity: int = 16      # point ring buffer per cell

    def cell_size(self, level: int) -> float:
        return self.base_cell * (1 << level)

    def half_extent(self, level: int) -> float:
        return self.cell_size(level) * self.cells / 2.0


class Cell:
    """Point ring buffer plus surfel statistics over the retained points."""

    __slots__ = ("_buf", "_write", "hits", "capacity")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._buf = np.empty((capacity, 3))
        self._write = 0
        self.hits = 0

    def insert(self, pts: np.ndarray):
        pts = np.atleast_2d(pts)
        self.hits += len(pts)
        for p in pts[-self.capacity:]:
            self._buf[self._write % self.capacity] = p
            self._write += 1

    @property
    def count(self) -> int:
        return min(self._write, self.capacity)

    @property
    def points(self) -> np.ndarray:
        n = self.count
        if self._write <= self.capacity:
            return self._buf[:n].copy()
        # oldest-to-newest order
        w = self._write % self.capacity
        return np.vstack([self._buf[w:], self._buf[:w]])

    @property
    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @property
    def covariance(self) -> np.ndarray:
        pts = self.points
        if len(pts) < 2:
            return np.zeros((3, 3))
        d = pts - pts.mean(axis=0)
        return d.T @ d / (len(pts) - 1)


class GridLevel:
    def __init__(self, config: GridConfig, level: int):
        self.c = config.cell_size(level)
        self.n = config.cells
        self.capacity = config.cell_capacity
        # window covers integer coords [origin, origin + n) per axis
        self.origin = np.full(3, -(self.n // 2), dtype=np.int64)
        self.accum = np.zeros(3)
        self._slots: dict[tuple, Cell] = {}
        self._coords: dict[tuple, tuple] = {}

    def window_contains(self, g) -> bool:
        return bool(np.all(g >= self.origin) and np.all(g < self.origin + self.n))

    def contains_point(self, p) -> bool:
        g = np.floor(np.asarray(p) / self.c).astype(np.int64)
        return self.window_contains(g)

    def cell_at(self, g, create: bool = False) -> Cell | None:
        g = tuple(int(x) for x in g)
        slot = (g[0] % self.n, g[1] % self.n, g[2] % self.n)
        if self._coords.get(slot) != g:
            if not create:
                return None
            self._slots[slot] = Cell(self.capacity)
            self._coords[slot] = g
        return self._slots[slot]

    def shift(self, delta):
        """Accumulate a translation; whole-cell parts move the window origin.

        Cells that fall out of the window are dropped immediately, so a slot
        can never serve stale data if its coordinate later re-enters the
        window.  No point data is moved.
        """
        self.accum += np.asarray(delta, dtype=float)
        k = np.floor(self.accum / self.c + 1e-12).astype(np.int64)
        self.accum -= k * self.c
        if np.any(k):
            self.origin += k
            for slot, g in list(self._coords.items()):
                if not self.window_contains(np.asarray(g)):
                    del self._coords[slot]
                    del self._slots[slot]

    def occupied(self):
        """Yield (coord, cell) for every live cell in the window."""
        for slot, g in list(self._coords.items()):
            ga = np.asarray(g)
            if self.window_contains(ga):
                yield g, self._slots[slot]
            else:
                # stale slot left behind by a shift
                del self._coords[slot]
                del self._slots[slot]


class MultiResGrid:
    """L interlaced levels; finer levels cover smaller radii around center."""

    def __init__(self, config: GridConfig = GridConfig()):
        self.config = config
        self.levels = [GridLevel(config, l) for l in range(config.levels)]

    @property
    def center(self) -> np.ndarray:
        """World position of the window center (finest level)."""
        lvl = self.levels[0]
        return (lvl.origin + lvl.n / 2.0) * lvl.c + lvl.accum

    def level_for(self, p) -> int | None:
        """Smallest level whose window contains p, or None."""
        for li, lvl in enumerate(self.levels):
            if lvl.contains_point(p):
                return li
        return None

    def insert(self, cloud: np.ndarray):
        cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
        if len(cloud) == 0:
            return
        remaining = cloud
        for lvl in self.levels:
            if len(remaining) == 0:
                break
            g = np.floor(remaining / lvl.c).astype(np.int64)
            inside = np.all((g >= lvl.origin) & (g < lvl.origin + lvl.n), axis=1)
            pts = remaining[inside]
            gin = g[inside]
            if len(pts):
                # group points by cell to amortize ring-buffer writes
                key = (
                    (gin[:, 0] - lvl.origin[0]) * lvl.n + (gin[:, 1] - lvl.origin[1])
                ) * lvl.n + (gin[:, 2] - lvl.origin[2])
                order = np.argsort(key, kind="stable")
                key = key[order]
                pts = pts[order]
                gin = gin[order]
                bounds = np.flatnonzero(np.diff(key)) + 1
                for a, b in zip(
                    np.concatenate([[0], bounds]),
                    np.concatenate([bounds, [len(key)]]),
                ):
                    lvl.cell_at(gin[a], create=True).insert(pts[a:b])
            remaining = remaining[~inside]

    def shift(self, delta):
        for lvl in self.levels:
            lvl.shift(delta)

    def all_points(self) -> np.ndarray:
        chunks = [
            cell.points for lvl in self.levels for _, cell in lvl.occupied()
        ]
        if not chunks:
            return np.empty((0, 3))
        return np.vstack(chunks)

    def cells(self):
        """Yield (level index, coord, cell) over all live cells."""
        for li, lvl in enumerate(self.levels):
            for g, cell in lvl.occupied():
                yield li, g, cell
