"""Distance fields: analytic scenes, voxel grids, EDT and grid files."""

from .grid import (
    DEFAULT_MAX_DISTANCE,
    DEFAULT_VOXEL_BUDGET,
    DistanceGrid,
    GridSpec,
    LookupMode,
    OccupancyGrid,
    OutOfBounds,
    VoxelField,
    edt,
    lookup,
    voxelize,
)
from .io import ingest_xyz, load_grid, occupancy_from_points, read_xyz, save_grid
from .scene import DEFAULT_SENTINEL, AnalyticField, Scene, analytic_distance, load_scene, save_scene

__all__ = [
    "AnalyticField",
    "DEFAULT_MAX_DISTANCE",
    "DEFAULT_SENTINEL",
    "DEFAULT_VOXEL_BUDGET",
    "DistanceGrid",
    "GridSpec",
    "LookupMode",
    "OccupancyGrid",
    "OutOfBounds",
    "Scene",
    "VoxelField",
    "analytic_distance",
    "edt",
    "ingest_xyz",
    "load_grid",
    "load_scene",
    "lookup",
    "occupancy_from_points",
    "read_xyz",
    "save_grid",
    "save_scene",
    "voxelize",
]
