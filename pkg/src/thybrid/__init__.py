"""Terrain-aware path planning on hybrid 2D-obstacle / 2.5D-terrain maps.

Pipeline: point cloud -> coarse voxel columns -> plane fits and fine-cell
roughness -> :class:`HybridMap` -> traversability-constrained Hybrid A*.
"""
from .errors import (CorruptFile, DegenerateCell, DegenerateProjection, EmptyCloud,
                     EmptyCloudWarning, FormatError, InvalidGoal, InvalidSpec, InvalidStart,
                     InvalidTransform, SamplingExhausted, ThybridError, VersionMismatch)
from .hybrid_map import CellState, HybridMap
from .planner import PlanNode, PlanRequest, PlanResult, THybridAStar, plan
from .pointcloud import PointCloud
from .robot import DEFAULT_SPEC, RobotSpec
from .terrain import TerrainAssessor

__version__ = "0.1.0"

__all__ = [
    "CellState", "CorruptFile", "DEFAULT_SPEC", "DegenerateCell", "DegenerateProjection",
    "EmptyCloud", "EmptyCloudWarning", "FormatError", "HybridMap", "InvalidGoal",
    "InvalidSpec", "InvalidStart", "InvalidTransform", "PlanNode", "PlanRequest",
    "PlanResult", "PointCloud", "RobotSpec", "SamplingExhausted", "THybridAStar",
    "TerrainAssessor", "ThybridError", "VersionMismatch", "plan",
]
