"""Simulated work cell: scene description, bodies, tools and contact."""

from .bodies import Body
from .scene import (
    DEFAULT_GRIPPERS,
    FixtureSpec,
    GripperModel,
    NoiseModel,
    ObjectSpec,
    ObstacleSpec,
    Scene,
    load_scene,
    observe,
    scene_from_dict,
    shipped_scene_path,
    shipped_scenes,
)
from .spring import SpringPlane
from .sim import ContactState, FixtureState, NothingGrasped, ToolGeometry, WeightCheck, World, contact_query

__all__ = [
    "Body", "ContactState", "DEFAULT_GRIPPERS", "FixtureSpec", "FixtureState", "GripperModel",
    "NoiseModel", "NothingGrasped", "ObjectSpec", "ObstacleSpec", "Scene", "ToolGeometry",
    "WeightCheck", "World", "contact_query", "load_scene", "observe", "scene_from_dict",
    "shipped_scene_path", "shipped_scenes", "SpringPlane",
]
