"""Text-to-goal and text-to-reward synthesis for tabletop manipulation."""

from .scene import (
    GoalSet,
    Pose,
    SceneManifest,
    TaskSpec,
    WorkspaceBounds,
    default_bounds,
    default_manifest,
    load_manifest,
    task_catalog,
    within_workspace,
)
from .validator import ValidationReport, oracle_goal, validate

__version__ = "0.1.0"

__all__ = [
    "GoalSet",
    "Pose",
    "SceneManifest",
    "TaskSpec",
    "ValidationReport",
    "WorkspaceBounds",
    "default_bounds",
    "default_manifest",
    "load_manifest",
    "oracle_goal",
    "task_catalog",
    "validate",
    "within_workspace",
]
