"""Scan assembly, egocentric multiresolution point grid, and 2.5D heightmaps."""

from .grid import Cell, GridConfig, GridLevel, MultiResGrid
from .heightmap import (
    PROV_GAPFILL,
    PROV_MEASURED,
    HeightMap,
    fill_gaps,
    median_filter_hist,
    median_filter_naive,
    merge_heightmaps,
    project_heightmap,
)
from .io import (
    dump_heightmap,
    load_heightmap,
    read_heightmap,
    read_xyz,
    save_heightmap,
    save_xyz,
)
from .scan import (
    PoseTimeline,
    ScanLine,
    TimelineGapError,
    assemble_scan,
    default_beam_angles,
    filter_jump_edges,
    undistort_line,
)

__all__ = [
    "Cell",
    "GridConfig",
    "GridLevel",
    "MultiResGrid",
    "HeightMap",
    "PROV_MEASURED",
    "PROV_GAPFILL",
    "project_heightmap",
    "fill_gaps",
    "median_filter_hist",
    "median_filter_naive",
    "merge_heightmaps",
    "dump_heightmap",
    "load_heightmap",
    "read_heightmap",
    "save_heightmap",
    "read_xyz",
    "save_xyz",
    "ScanLine",
    "PoseTimeline",
    "TimelineGapError",
    "assemble_scan",
    "default_beam_angles",
    "filter_jump_edges",
    "undistort_line",
]
