"""Annotation document serialization and RGB-D frame directories.

Documents are schema-versioned JSON, human-diffable, with the RLE mask
form as the bit-exact interchange encoding. Frame directories hold 8-bit
RGB and 16-bit millimeter depth PNGs named rgb_%05d.png / depth_%05d.png.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .scene import (
    MaskTube,
    ObjectInstance,
    RGBDSequence,
    SceneGraph4D,
    TimedRelation,
)

__all__ = [
    "SCHEMA_VERSION",
    "SchemaError",
    "VideoAnnotation",
    "annotation_to_document",
    "document_to_annotation",
    "save_annotation",
    "load_annotation",
    "load_annotation_dir",
    "save_frames",
    "load_frames",
    "DatasetStats",
    "dataset_stats",
]

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Document validation failure, addressed down to the offending field."""

    def __init__(self, where: str, message: str, source: str | None = None):
        self.where = where
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{where}: {message}")


@dataclass(frozen=True)
class VideoAnnotation:
    """A scene graph plus the video-level metadata that grounds it."""

    video_id: str
    duration: float
    frames: int
    width: int
    height: int
    scene: SceneGraph4D
    confidences: tuple[int | None, ...] = ()

    def __post_init__(self):
        if self.confidences and len(self.confidences) != len(self.scene.relations):
            raise ValueError("confidences must align with relations")


def annotation_to_document(ann: VideoAnnotation) -> dict:
    objects = []
    for obj in ann.scene.objects:
        entry: dict = {"id": obj.id, "category": obj.category}
        if obj.instance_index is not None:
            entry["instance_index"] = obj.instance_index
        if obj.description is not None:
            entry["description"] = obj.description
        tube = ann.scene.masks.get(obj.id)
        entry["mask_rle"] = [list(frame) for frame in tube.runs] if tube is not None else None
        objects.append(entry)
    relations = []
    for index, rel in enumerate(ann.scene.relations):
        entry = {
            "subject_id": rel.subject_id,
            "object_id": rel.object_id,
            "predicate": rel.predicate,
            "begin": rel.t_s,
            "end": rel.t_e,
        }
        if ann.confidences and ann.confidences[index] is not None:
            entry["confidence"] = ann.confidences[index]
        relations.append(entry)
    return {
        "schema": SCHEMA_VERSION,
        "video_id": ann.video_id,
        "duration": ann.duration,
        "frames": ann.frames,
        "width": ann.width,
        "height": ann.height,
        "objects": objects,
        "relations": relations,
    }


def _need(document: dict, key: str, kinds, where: str, source):
    if key not in document:
        raise SchemaError(f"{where}.{key}", "missing required field", source)
    value = document[key]
    if not isinstance(value, kinds):
        raise SchemaError(f"{where}.{key}", f"expected {kinds}, got {type(value).__name__}", source)
    return value

_DOCUMENT_KEYS = {"schema", "video_id", "duration", "frames", "width", "height", "objects", "relations"}
_OBJECT_KEYS = {"id", "category", "instance_index", "description", "mask_rle"}
_RELATION_KEYS = {"subject_id", "object_id", "predicate", "begin", "end", "confidence"}


def document_to_annotation(document: dict, source: str | None = None) -> VideoAnnotation:
    """Validate and materialize a document; schema errors carry field paths."""
    if not isinstance(document, dict):
        raise SchemaError("$", "document must be an object", source)
    unknown = set(document) - _DOCUMENT_KEYS
    if unknown:
        raise SchemaError("$", f"unknown fields: {sorted(unknown)}", source)
    schema = _need(document, "schema", int, "$", source)
    if schema != SCHEMA_VERSION:
        raise SchemaError("$.schema", f"unsupported version {schema}", source)
    video_id = _need(document, "video_id", str, "$", source)
    duration = float(_need(document, "duration", (int, float), "$", source))
    frames = _need(document, "frames", int, "$", source)
    width = _need(document, "width", int, "$", source)
    height = _need(document, "height", int, "$", source)
    if duration <= 0:
        raise SchemaError("$.duration", "must be positive", source)
    if min(frames, width, height) <= 0:
        raise SchemaError("$.frames", "frames/width/height must be positive", source)

    objects: list[ObjectInstance] = []
    masks: dict[int, MaskTube] = {}
    for index, entry in enumerate(_need(document, "objects", list, "$", source)):
        where = f"$.objects[{index}]"
        if not isinstance(entry, dict):
            raise SchemaError(where, "expected an object entry", source)
        unknown = set(entry) - _OBJECT_KEYS
        if unknown:
            raise SchemaError(where, f"unknown fields: {sorted(unknown)}", source)
        object_id = _need(entry, "id", int, where, source)
        category = _need(entry, "category", str, where, source)
        instance_index = entry.get("instance_index")
        if instance_index is not None and not isinstance(instance_index, int):
            raise SchemaError(f"{where}.instance_index", "expected an integer", source)
        try:
            objects.append(ObjectInstance(object_id, category, instance_index, entry.get("description")))
        except ValueError as exc:
            raise SchemaError(where, str(exc), source) from exc
        rle = entry.get("mask_rle")
        if rle is not None:
            if not isinstance(rle, list) or not all(isinstance(f, list) for f in rle):
                raise SchemaError(f"{where}.mask_rle", "expected a list of per-frame run arrays", source)
            try:
                tube = MaskTube(frames=len(rle), width=width, height=height,
                                runs=tuple(tuple(run) for run in rle))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{where}.mask_rle", str(exc), source) from exc
            if tube.frames != frames:
                raise SchemaError(f"{where}.mask_rle", f"{tube.frames} frames, document says {frames}", source)
            if not tube.frame_sums_ok():
                raise SchemaError(f"{where}.mask_rle", f"frame runs do not sum to {width * height}", source)
            masks[object_id] = tube

    known_ids = {obj.id for obj in objects}
    if len(known_ids) != len(objects):
        raise SchemaError("$.objects", "duplicate object ids", source)

    relations: list[TimedRelation] = []
    confidences: list[int | None] = []
    for index, entry in enumerate(_need(document, "relations", list, "$", source)):
        where = f"$.relations[{index}]"
        if not isinstance(entry, dict):
            raise SchemaError(where, "expected a relation entry", source)
        unknown = set(entry) - _RELATION_KEYS
        if unknown:
            raise SchemaError(where, f"unknown fields: {sorted(unknown)}", source)
        subject_id = _need(entry, "subject_id", int, where, source)
        object_id = _need(entry, "object_id", int, where, source)
        predicate = _need(entry, "predicate", str, where, source)
        begin = float(_need(entry, "begin", (int, float), where, source))
        end = float(_need(entry, "end", (int, float), where, source))
        for endpoint, key in ((subject_id, "subject_id"), (object_id, "object_id")):
            if endpoint not in known_ids:
                raise SchemaError(f"{where}.{key}", f"unknown object id {endpoint}", source)
        confidence = entry.get("confidence")
        if confidence is not None and not isinstance(confidence, int):
            raise SchemaError(f"{where}.confidence", "expected an integer rank", source)
        try:
            relations.append(TimedRelation(subject_id, object_id, predicate, begin, end))
        except ValueError as exc:
            raise SchemaError(where, str(exc), source) from exc
        confidences.append(confidence)

    scene = SceneGraph4D(objects=tuple(objects), masks=masks, relations=tuple(relations))
    has_confidence = any(c is not None for c in confidences)
    return VideoAnnotation(
        video_id=video_id,
        duration=duration,
        frames=frames,
        width=width,
        height=height,
        scene=scene,
        confidences=tuple(confidences) if has_confidence else (),
    )


def save_annotation(path: str | Path, ann: VideoAnnotation) -> None:
    path = Path(path)
    path.write_text(json.dumps(annotation_to_document(ann), indent=1, sort_keys=True) + "\n")


def load_annotation(path: str | Path) -> VideoAnnotation:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}", str(path)) from exc
    return document_to_annotation(document, source=str(path))


def load_annotation_dir(directory: str | Path) -> dict[str, VideoAnnotation]:
    """Load every *.json document in a directory, keyed by video id."""
    directory = Path(directory)
    annotations: dict[str, VideoAnnotation] = {}
    for path in sorted(directory.glob("*.json")):
        ann = load_annotation(path)
        if ann.video_id in annotations:
            raise SchemaError("$.video_id", f"duplicate video id {ann.video_id!r}", str(path))
        annotations[ann.video_id] = ann
    return annotations


# -- frame directories ---------------------------------------------------

def save_frames(directory: str | Path, seq: RGBDSequence) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t in range(seq.frames):
        Image.fromarray(seq.rgb_frames[t].astype(np.uint8), mode="RGB").save(
            directory / f"rgb_{t:05d}.png")
        depth = seq.depth_frames[t].astype(np.uint16)  # infers 16-bit grayscale
        Image.fromarray(depth).save(directory / f"depth_{t:05d}.png")


def load_frames(directory: str | Path, video_id: str | None = None,
                duration: float = 1.0) -> RGBDSequence:
    """Load an rgb_%05d.png / depth_%05d.png directory; depth reads as mm."""
    directory = Path(directory)
    rgb_paths = sorted(directory.glob("rgb_*.png"))
    depth_paths = sorted(directory.glob("depth_*.png"))
    if not rgb_paths:
        raise SchemaError("$", "no rgb frames found", str(directory))
    if len(rgb_paths) != len(depth_paths):
        raise SchemaError(
            "$", f"{len(rgb_paths)} rgb frames but {len(depth_paths)} depth frames", str(directory))
    rgb_frames = []
    depth_frames = []
    for rgb_path, depth_path in zip(rgb_paths, depth_paths):
        rgb = np.asarray(Image.open(rgb_path).convert("RGB"), dtype=np.uint8)
        depth = np.asarray(Image.open(depth_path), dtype=np.uint16)
        if depth.shape != rgb.shape[:2]:
            raise SchemaError("$", f"frame size mismatch between {rgb_path.name} and {depth_path.name}", str(directory))
        rgb_frames.append(rgb)
        depth_frames.append(depth)
    height, width = rgb_frames[0].shape[:2]
    for index, frame in enumerate(rgb_frames):
        if frame.shape[:2] != (height, width):
            raise SchemaError("$", f"frame {index} has inconsistent size {frame.shape[:2]}", str(directory))
    return RGBDSequence(
        video_id=video_id or directory.name,
        rgb_frames=tuple(rgb_frames),
        depth_frames=tuple(depth_frames),
        width=width,
        height=height,
        duration=duration,
    )


# -- corpus statistics ----------------------------------------------------

@dataclass
class DatasetStats:
    videos: int
    object_instances: int
    relations: int
    category_freq: dict[str, int] = field(default_factory=dict)
    predicate_freq: dict[str, int] = field(default_factory=dict)

    @property
    def num_object_categories(self) -> int:
        return len(self.category_freq)

    @property
    def num_predicates(self) -> int:
        return len(self.predicate_freq)

    def to_dict(self) -> dict:
        return {
            "videos": self.videos,
            "object_instances": self.object_instances,
            "relations": self.relations,
            "object_categories": self.num_object_categories,
            "predicate_categories": self.num_predicates,
            "category_freq": dict(sorted(self.category_freq.items())),
            "predicate_freq": dict(sorted(self.predicate_freq.items())),
        }


def dataset_stats(annotations) -> DatasetStats:
    """Tally categories, predicates, and relation counts over a corpus."""
    categories: Counter = Counter()
    predicates: Counter = Counter()
    object_instances = 0
    relations = 0
    videos = 0
    for ann in annotations:
        videos += 1
        for obj in ann.scene.objects:
            categories[obj.category] += 1
            object_instances += 1
        for rel in ann.scene.relations:
            predicates[" ".join(rel.predicate.lower().split())] += 1
            relations += 1
    return DatasetStats(
        videos=videos,
        object_instances=object_instances,
        relations=relations,
        category_freq=dict(categories),
        predicate_freq=dict(predicates),
    )
