"""Portable map exports: binary heightmap grid and ASCII xyz point clouds.

Heightmap file layout (little-endian):

    offset  size        field
    0       4           magic b"THM1"
    4       4           uint32 rows H
    8       4           uint32 cols W
    12      8           float64 resolution (m/cell)
    20      16          2 x float64 world XY of cell [0, 0] center
    36      4*H*W       float32 heights, row-major (NaN where invalid)
    ...     ceil(HW/8)  validity bitmap, row-major, MSB-first within a byte
    ...     H*W         uint8 provenance flags, row-major
"""

from __future__ import annotations

import struct

import numpy as np

from .heightmap import HeightMap

HEIGHTMAP_MAGIC = b"THM1"


def dump_heightmap(hm: HeightMap) -> bytes:
    h, w = hm.heights.shape
    header = HEIGHTMAP_MAGIC + struct.pack(
        "<IIddd", h, w, hm.resolution, hm.origin[0], hm.origin[1]
    )
    heights = np.where(hm.valid, hm.heights, np.nan).astype("<f4").tobytes()
    bitmap = np.packbits(hm.valid.reshape(-1)).tobytes()
    prov = hm.provenance.astype(np.uint8).tobytes()
    return header + heights + bitmap + prov


def load_heightmap(blob: bytes) -> HeightMap:
    if blob[:4] != HEIGHTMAP_MAGIC:
        raise ValueError("not a heightmap blob")
    h, w, res, ox, oy = struct.unpack_from("<IIddd", blob, 4)
    off = 4 + struct.calcsize("<IIddd")
    heights = np.frombuffer(blob, dtype="<f4", count=h * w, offset=off)
    heights = heights.reshape(h, w).astype(float)
    off += 4 * h * w
    nbytes = -(-h * w // 8)
    bits = np.unpackbits(np.frombuffer(blob, dtype=np.uint8,
                                       count=nbytes, offset=off))
    valid = bits[: h * w].reshape(h, w).astype(bool)
    off += nbytes
    prov = np.frombuffer(blob, dtype=np.uint8, count=h * w, offset=off)
    return HeightMap(heights, valid, np.array([ox, oy]), res,
                     prov.reshape(h, w).copy())


def save_heightmap(hm: HeightMap, path):
    with open(path, "wb") as f:
        f.write(dump_heightmap(hm))


def read_heightmap(path) -> HeightMap:
    with open(path, "rb") as f:
        return load_heightmap(f.read())


def save_xyz(points: np.ndarray, path):
    """ASCII point cloud, one 'x y z' line per point."""
    np.savetxt(path, np.atleast_2d(points), fmt="%.6f")


def read_xyz(path) -> np.ndarray:
    pts = np.loadtxt(path)
    return np.atleast_2d(pts)
