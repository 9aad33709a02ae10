"""Core domain types for 4D scenes and their panoptic scene graphs.

A 4D scene couples an RGB-D frame sequence with a graph: object instances,
per-object binary mask tubes tracking pixels over time, and relations that
hold over a fraction of the video. All types are immutable after
construction and safe to share read-only across threads.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "LabelError",
    "normalize_label",
    "format_label",
    "clamp_span",
    "interval_iou",
    "ObjectInstance",
    "MaskTube",
    "TimedRelation",
    "Quintuple",
    "RGBDSequence",
    "SceneGraph4D",
    "Violation",
    "validate_scene",
]


class LabelError(ValueError):
    """Raised for labels that are empty after trimming."""


_WHITESPACE = re.compile(r"\s+")
_TRAILING_INDEX = re.compile(r"(.*?)[\s-](\d+)$")


def normalize_label(raw: str) -> tuple[str, int | None]:
    """Canonicalize a free-form object label.

    Lowercases, trims, collapses internal whitespace, and splits a single
    trailing instance index off the category, accepting both the spaced and
    the hyphenated form:

        "Person 1"         -> ("person", 1)
        "road-barrier-295" -> ("road-barrier", 295)
        "gravel"           -> ("gravel", None)
    """
    if raw is None:
        raise LabelError("label is None")
    text = _WHITESPACE.sub(" ", str(raw).strip().lower())
    if not text:
        raise LabelError(f"label empty after trimming: {raw!r}")
    m = _TRAILING_INDEX.match(text)
    if m and m.group(1).strip(" -"):
        return m.group(1).rstrip(), int(m.group(2))
    return text, None


def format_label(category: str, instance_index: int | None) -> str:
    """Render a (category, index) pair back to display form.

    Fixed point of :func:`normalize_label`: renormalizing the result yields
    the same pair.
    """
    if instance_index is None:
        return category
    return f"{category} {instance_index}"


def clamp_span(t_s: float, t_e: float) -> tuple[float, float, list[str]]:
    """Clamp a raw time span to [0, 1] fractions, reordering if reversed.

    Noisy generators routinely emit spans slightly out of range; those are
    repaired rather than rejected. Returns the repaired span plus warning
    strings describing each repair.
    """
    warnings: list[str] = []
    t_s, t_e = float(t_s), float(t_e)
    if t_e < t_s:
        warnings.append(f"span reversed, swapped: ({t_s}, {t_e})")
        t_s, t_e = t_e, t_s
    repaired_s = min(1.0, max(0.0, t_s))
    repaired_e = min(1.0, max(0.0, t_e))
    if repaired_s != t_s or repaired_e != t_e:
        warnings.append(f"span clamped to [0, 1]: ({t_s}, {t_e})")
    return repaired_s, repaired_e, warnings


def interval_iou(a_s: float, a_e: float, b_s: float, b_e: float) -> float:
    """Intersection over union of two closed intervals.

    A zero-length union only happens when all four endpoints coincide;
    that counts as a perfect match.
    """
    inter = min(a_e, b_e) - max(a_s, b_s)
    union = max(a_e, b_e) - min(a_s, b_s)
    if union <= 0.0:
        return 1.0
    return max(0.0, inter) / union


@dataclass(frozen=True)
class ObjectInstance:
    """One tracked object: scene-unique id plus a normalized category."""

    id: int
    category: str
    instance_index: int | None = None
    description: str | None = None

    def __post_init__(self):
        if not self.category or not self.category.strip():
            raise ValueError(f"object {self.id}: category must be non-empty")

    @classmethod
    def from_label(cls, object_id: int, raw_label: str, description: str | None = None) -> "ObjectInstance":
        category, index = normalize_label(raw_label)
        return cls(object_id, category, index, description)

    @property
    def label(self) -> str:
        return format_label(self.category, self.instance_index)


@dataclass(frozen=True)
class MaskTube:
    """Run-length encoded binary volume over frames x height x width.

    Per frame the runs alternate background/foreground counts in row-major
    order, always starting with background (possibly zero). Each frame's
    counts must sum to width * height; decoders enforce this.
    """

    frames: int
    width: int
    height: int
    runs: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.frames <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("mask tube dimensions must be positive")
        if len(self.runs) != self.frames:
            raise ValueError(
                f"expected {self.frames} run arrays, got {len(self.runs)}"
            )
        object.__setattr__(self, "runs", tuple(tuple(int(r) for r in frame) for frame in self.runs))
        for t, frame in enumerate(self.runs):
            if any(r < 0 for r in frame):
                raise ValueError(f"frame {t}: negative run length")

    def frame_sums_ok(self) -> bool:
        area = self.width * self.height
        return all(sum(frame) == area for frame in self.runs)


@dataclass(frozen=True)
class TimedRelation:
    """A predicate linking two objects over a fraction of the video.

    Spans are fractions of the sequence duration. Construction clamps and
    reorders out-of-range spans (logged), since upstream generators are
    noisy by nature.
    """

    subject_id: int
    object_id: int
    predicate: str
    t_s: float
    t_e: float

    def __post_init__(self):
        if self.subject_id == self.object_id:
            raise ValueError(f"relation links object {self.subject_id} to itself")
        if not self.predicate or not self.predicate.strip():
            raise ValueError("predicate must be non-empty")
        t_s, t_e, warnings = clamp_span(self.t_s, self.t_e)
        for w in warnings:
            log.warning("relation (%s, %s, %s): %s", self.subject_id, self.predicate, self.object_id, w)
        object.__setattr__(self, "t_s", t_s)
        object.__setattr__(self, "t_e", t_e)

    @property
    def span(self) -> tuple[float, float]:
        return (self.t_s, self.t_e)


@dataclass(frozen=True)
class Quintuple:
    """Label-level (subject, predicate, object, t_s, t_e) record.

    The currency of parsing and evaluation. ``confidence`` is an ordinal
    rank (1 = emitted first); generators backed by language models produce
    no scores, so emission order is the only ordering signal.
    """

    subject_label: str
    predicate_label: str
    object_label: str
    t_s: float
    t_e: float
    confidence: int | None = None

    def __post_init__(self):
        for name in ("subject_label", "predicate_label", "object_label"):
            value = getattr(self, name)
            if not value or not value.strip():
                raise ValueError(f"{name} must be non-empty")
        t_s, t_e, warnings = clamp_span(self.t_s, self.t_e)
        for w in warnings:
            log.warning("quintuple (%s, %s, %s): %s", self.subject_label, self.predicate_label, self.object_label, w)
        object.__setattr__(self, "t_s", t_s)
        object.__setattr__(self, "t_e", t_e)

    def triplet(self) -> tuple[str, str, str]:
        return (self.subject_label, self.predicate_label, self.object_label)


@dataclass(frozen=True, eq=False)
class RGBDSequence:
    """An aligned RGB-D video: per-frame color images and depth maps.

    Depth is stored in millimeters. All frames share one width/height and
    the two modalities have equal frame counts.
    """

    video_id: str
    rgb_frames: tuple[np.ndarray, ...]
    depth_frames: tuple[np.ndarray, ...]
    width: int
    height: int
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if len(self.rgb_frames) < 1:
            raise ValueError("need at least one frame")
        if len(self.rgb_frames) != len(self.depth_frames):
            raise ValueError(
                f"rgb/depth frame counts differ: {len(self.rgb_frames)} vs {len(self.depth_frames)}"
            )
        for t, (rgb, depth) in enumerate(zip(self.rgb_frames, self.depth_frames)):
            if rgb.shape != (self.height, self.width, 3):
                raise ValueError(f"rgb frame {t} has shape {rgb.shape}, expected {(self.height, self.width, 3)}")
            if depth.shape != (self.height, self.width):
                raise ValueError(f"depth frame {t} has shape {depth.shape}, expected {(self.height, self.width)}")

    @property
    def frames(self) -> int:
        return len(self.rgb_frames)


@dataclass(frozen=True)
class SceneGraph4D:
    """Objects, their mask tubes, and timed relations for one video."""

    objects: tuple[ObjectInstance, ...] = ()
    masks: dict[int, MaskTube] = field(default_factory=dict)
    relations: tuple[TimedRelation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relations", tuple(self.relations))

    def by_id(self, object_id: int) -> ObjectInstance | None:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        return None

    @property
    def object_ids(self) -> set[int]:
        return {obj.id for obj in self.objects}


@dataclass(frozen=True)
class Violation:
    """A machine-readable invariant violation found by validation."""

    code: str
    message: str
    subject: int | str | None = None


def validate_scene(scene: SceneGraph4D, seq: RGBDSequence | None = None) -> list[Violation]:
    """Collect every invariant violation in a scene.

    Violations are data, not failures: an empty list means the scene is
    well-formed (against ``seq`` too, when given).
    """
    violations: list[Violation] = []
    seen_ids: set[int] = set()
    for obj in scene.objects:
        if obj.id in seen_ids:
            violations.append(Violation("duplicate-object-id", f"object id {obj.id} appears twice", obj.id))
        seen_ids.add(obj.id)

    for object_id, tube in scene.masks.items():
        if object_id not in seen_ids:
            violations.append(Violation("mask-unknown-object", f"mask for missing object id {object_id}", object_id))
        if not tube.frame_sums_ok():
            violations.append(Violation(
                "corrupt-rle",
                f"mask for object {object_id}: frame runs do not sum to {tube.width * tube.height}",
                object_id,
            ))
        if seq is not None:
            if tube.frames != seq.frames:
                violations.append(Violation(
                    "tube-length-mismatch",
                    f"mask for object {object_id} has {tube.frames} frames, sequence has {seq.frames}",
                    object_id,
                ))
            if (tube.width, tube.height) != (seq.width, seq.height):
                violations.append(Violation(
                    "tube-shape-mismatch",
                    f"mask for object {object_id} is {tube.width}x{tube.height}, sequence is {seq.width}x{seq.height}",
                    object_id,
                ))

    for rel in scene.relations:
        for endpoint in (rel.subject_id, rel.object_id):
            if endpoint not in seen_ids:
                violations.append(Violation("dangling-object", f"relation references missing object id {endpoint}", endpoint))
        if not (0.0 <= rel.t_s <= rel.t_e <= 1.0):
            violations.append(Violation("bad-span", f"relation span ({rel.t_s}, {rel.t_e}) out of order or range"))

    return violations
