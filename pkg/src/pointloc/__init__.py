"""Pointing-gesture recognition and target localisation on a gridded board."""
from .board import BoardModel, CellResult, GridSpec, build_grid, classify, to_board_coords
from .engine import EngineConfig, PointingEngine, select_arm, update_stability
from .geometry import (Plane, PointingRay, RigidTransform, apply, compose, intersect_ray_plane, invert,
                       rotation_from_quaternion)
from .stream import JointFrame, PointingEvent, parse_frame, replay, serialize_event, serialize_frame

__version__ = "0.1.0"

__all__ = [
    "BoardModel", "CellResult", "GridSpec", "build_grid", "classify", "to_board_coords",
    "EngineConfig", "PointingEngine", "select_arm", "update_stability",
    "Plane", "PointingRay", "RigidTransform", "apply", "compose", "intersect_ray_plane", "invert",
    "rotation_from_quaternion",
    "JointFrame", "PointingEvent", "parse_frame", "replay", "serialize_event", "serialize_frame",
]
