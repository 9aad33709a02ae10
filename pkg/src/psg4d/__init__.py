"""Desk-scale 4D panoptic scene graph toolkit.

Represent RGB-D scenes and their graphs, run chained scene-graph inference
against a pluggable text-generation backend, evaluate with R@K and mR@K
under grounded matching, and train toy feature-transcending estimators
with verified gradients through a five-step schedule.
"""

from .scene import (
    LabelError,
    MaskTube,
    ObjectInstance,
    Quintuple,
    RGBDSequence,
    SceneGraph4D,
    TimedRelation,
    Violation,
    format_label,
    interval_iou,
    normalize_label,
    validate_scene,
)

__version__ = "0.1.0"

__all__ = [
    "LabelError",
    "MaskTube",
    "ObjectInstance",
    "Quintuple",
    "RGBDSequence",
    "SceneGraph4D",
    "TimedRelation",
    "Violation",
    "format_label",
    "interval_iou",
    "normalize_label",
    "validate_scene",
    "__version__",
]
