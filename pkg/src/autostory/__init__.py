"""Story visualization pipeline with pluggable model backends."""

__version__ = "0.1.0"

from .errors import AutoStoryError
from .model import (
    BoundingBox,
    CharacterProfile,
    ConditionMap,
    Joint,
    KeypointSet,
    LocalBinding,
    Panel,
    Project,
    SceneLayout,
    ValidationReport,
    validate_scene_layout,
)

__all__ = [
    "AutoStoryError",
    "BoundingBox",
    "CharacterProfile",
    "ConditionMap",
    "Joint",
    "KeypointSet",
    "LocalBinding",
    "Panel",
    "Project",
    "SceneLayout",
    "ValidationReport",
    "validate_scene_layout",
    "__version__",
]
