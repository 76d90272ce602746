from .camera import CameraPose, sample_camera
from .generate import GeneratedScene, SceneConfig, ScenePair, generate_scene, pairs, scene_seed
from .objects import (
    TABLE_LABELS,
    ArticulatedObject,
    Category,
    Joint,
    JointKind,
    Part,
    build_object,
)
from .render import PartInfo, RenderedScene, SceneJoint, render

__all__ = [
    "ArticulatedObject", "CameraPose", "Category", "GeneratedScene", "Joint", "JointKind", "Part",
    "PartInfo", "RenderedScene", "SceneConfig", "SceneJoint", "ScenePair", "TABLE_LABELS",
    "build_object", "generate_scene", "pairs", "render", "sample_camera", "scene_seed",
]
