"""Synthetic 4D scenes with planted, exactly-bookkept prediction noise.

Gold scenes place each object in its own horizontal band, so tubes of
distinct objects never overlap and every grounded match decision reduces
to the object's own jitter. Corruptions are recorded precisely enough
that expected recall is computable in closed form: a shifted box of width
w moved k columns has tube IoU exactly (w - k) / (w + k), swapped
predicates can never match, and spurious insertions use labels outside
the gold vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import VideoAnnotation
from .masks import rle_encode
from .scene import MaskTube, ObjectInstance, SceneGraph4D, TimedRelation, interval_iou

__all__ = [
    "SynthConfig",
    "RelationRecord",
    "VideoBookkeeping",
    "SyntheticVideo",
    "generate_synthetic",
    "expected_matched",
    "corpus_vocab",
]

OBJECT_VOCAB = (
    "person", "car", "dog", "table", "chair", "ball", "tree", "bicycle",
    "cup", "door",
)
PREDICATE_VOCAB = (
    "holding", "near", "running toward", "sitting on", "behind",
    "walking alongside", "in front of", "part of",
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    videos: int = 4
    frames: int = 4
    width: int = 8
    height: int = 8
    min_objects: int = 2
    max_objects: int = 4
    relations_min: int = 1
    relations_max: int = 6
    object_vocab: tuple[str, ...] = OBJECT_VOCAB
    predicate_vocab: tuple[str, ...] = PREDICATE_VOCAB
    label_noise: float = 0.0
    mask_jitter: float = 0.0
    span_jitter: float = 0.0
    spurious_rate: float = 0.0
    duration: float = 8.0

    def __post_init__(self):
        if min(self.videos, self.frames) < 1 or self.width < 4 or self.height < 3:
            raise ValueError("need videos, frames >= 1, width >= 4, height >= 3")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ValueError("object count range is invalid")
        if self.max_objects + 1 > self.height:
            raise ValueError("max_objects + 1 lanes must fit in the height")
        if not 1 <= self.relations_min <= self.relations_max:
            raise ValueError("relation count range is invalid")
        for knob in ("label_noise", "mask_jitter", "span_jitter", "spurious_rate"):
            if not 0.0 <= getattr(self, knob) <= 1.0:
                raise ValueError(f"{knob} must lie in [0, 1]")


@dataclass(frozen=True)
class RelationRecord:
    """How one gold relation was (or was not) corrupted in the prediction."""

    pred_index: int
    gold_index: int
    gold_predicate: str
    pred_predicate: str
    swapped: bool
    subject_iou: float
    object_iou: float
    gold_span: tuple[float, float]
    pred_span: tuple[float, float]


@dataclass(frozen=True)
class VideoBookkeeping:
    video_id: str
    records: tuple[RelationRecord, ...]
    spurious: int


@dataclass(frozen=True)
class SyntheticVideo:
    gold: VideoAnnotation
    pred: VideoAnnotation
    bookkeeping: VideoBookkeeping


def expected_matched(book: VideoBookkeeping, viou: float, grounded: bool,
                     temporal_threshold: float = 0.0) -> int:
    """Closed-form matched count, assuming all predictions fit within K."""
    matched = 0
    for record in book.records:
        if record.swapped:
            continue
        if grounded and min(record.subject_iou, record.object_iou) < viou:
            continue
        if temporal_threshold > 0.0:
            t = interval_iou(*record.pred_span, *record.gold_span)
            if t < temporal_threshold:
                continue
        matched += 1
    return matched


def _box_volume(frames: int, height: int, width: int, rows: tuple[int, int],
                cols: list[tuple[int, int]]) -> np.ndarray:
    volume = np.zeros((frames, height, width), dtype=np.uint8)
    for t, (c0, c1) in enumerate(cols):
        volume[t, rows[0]:rows[1], c0:c1] = 1
    return volume


def _instance_indices(categories: list[str]) -> list[int | None]:
    counts: dict[str, int] = {}
    for category in categories:
        counts[category] = counts.get(category, 0) + 1
    seen: dict[str, int] = {}
    indices: list[int | None] = []
    for category in categories:
        if counts[category] > 1:
            seen[category] = seen.get(category, 0) + 1
            indices.append(seen[category])
        else:
            indices.append(None)
    return indices


def generate_synthetic(cfg: SynthConfig) -> list[SyntheticVideo]:
    """Deterministically generate (gold, noisy prediction) pairs."""
    rng = np.random.default_rng(cfg.seed)
    videos: list[SyntheticVideo] = []
    width_max = max(2, (cfg.width - 1) // 2)
    for v in range(cfg.videos):
        video_id = f"v{v:04d}"
        n_objects = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
        lanes = n_objects + 1  # last lane reserved for spurious objects
        lane_height = cfg.height // lanes

        categories = [str(rng.choice(cfg.object_vocab)) for _ in range(n_objects)]
        indices = _instance_indices(categories)
        objects = [
            ObjectInstance(i + 1, categories[i], indices[i]) for i in range(n_objects)
        ]

        gold_masks: dict[int, MaskTube] = {}
        pred_masks: dict[int, MaskTube] = {}
        object_iou: dict[int, float] = {}
        for i, obj in enumerate(objects):
            rows = (i * lane_height, i * lane_height + lane_height)
            w = int(rng.integers(2, width_max + 1))
            col_limit = cfg.width - 2 * w + 1
            c0 = int(rng.integers(0, col_limit))
            c1 = int(rng.integers(0, col_limit))
            cols = []
            for t in range(cfg.frames):
                frac = t / (cfg.frames - 1) if cfg.frames > 1 else 0.0
                col = int(round(c0 + (c1 - c0) * frac))
                cols.append((col, col + w))
            gold_masks[obj.id] = rle_encode(_box_volume(cfg.frames, cfg.height, cfg.width, rows, cols))
            if cfg.mask_jitter > 0.0 and rng.random() < cfg.mask_jitter:
                shift = int(rng.integers(1, w))
                shifted = [(c0_ + shift, c1_ + shift) for c0_, c1_ in cols]
                pred_masks[obj.id] = rle_encode(_box_volume(cfg.frames, cfg.height, cfg.width, rows, shifted))
                object_iou[obj.id] = (w - shift) / (w + shift)
            else:
                pred_masks[obj.id] = gold_masks[obj.id]
                object_iou[obj.id] = 1.0

        n_relations = int(rng.integers(cfg.relations_min, cfg.relations_max + 1))
        gold_relations: list[TimedRelation] = []
        if n_objects >= 2:
            for _ in range(n_relations):
                subject, target = rng.choice(n_objects, size=2, replace=False)
                predicate = str(rng.choice(cfg.predicate_vocab))
                t_s = round(float(rng.uniform(0.0, 0.5)), 2)
                t_e = round(float(rng.uniform(t_s + 0.1, 1.0)), 2)
                gold_relations.append(TimedRelation(
                    int(subject) + 1, int(target) + 1, predicate, t_s, t_e))

        gold_scene = SceneGraph4D(tuple(objects), gold_masks, tuple(gold_relations))
        gold = VideoAnnotation(video_id, cfg.duration, cfg.frames, cfg.width,
                               cfg.height, gold_scene)

        # corrupt a shuffled copy of the gold relations
        order = rng.permutation(len(gold_relations))
        records: list[RelationRecord] = []
        pred_relations: list[TimedRelation] = []
        for pred_index, gold_index in enumerate(order):
            rel = gold_relations[int(gold_index)]
            predicate = rel.predicate
            swapped = False
            if cfg.label_noise > 0.0 and rng.random() < cfg.label_noise:
                predicate = f"corrupted-{predicate}"
                swapped = True
            span = (rel.t_s, rel.t_e)
            if cfg.span_jitter > 0.0 and rng.random() < cfg.span_jitter:
                delta = float(rng.uniform(-0.4, 0.4))
                begin = min(1.0, max(0.0, rel.t_s + delta))
                end = min(1.0, max(begin, rel.t_e + delta))
                span = (round(begin, 3), round(end, 3))
            pred_relations.append(TimedRelation(
                rel.subject_id, rel.object_id, predicate, span[0], span[1]))
            records.append(RelationRecord(
                pred_index=pred_index,
                gold_index=int(gold_index),
                gold_predicate=rel.predicate,
                pred_predicate=predicate,
                swapped=swapped,
                subject_iou=object_iou[rel.subject_id],
                object_iou=object_iou[rel.object_id],
                gold_span=(rel.t_s, rel.t_e),
                pred_span=span,
            ))

        pred_objects = list(objects)
        n_spurious = 0
        if cfg.spurious_rate > 0.0 and gold_relations:
            n_spurious = int(rng.binomial(len(gold_relations), cfg.spurious_rate))
        if n_spurious:
            spare_rows = (n_objects * lane_height, n_objects * lane_height + lane_height)
            phantom_a = ObjectInstance(n_objects + 1, "phantom-sentinel", 1)
            phantom_b = ObjectInstance(n_objects + 2, "phantom-sentinel", 2)
            pred_objects += [phantom_a, phantom_b]
            for obj, col in ((phantom_a, 0), (phantom_b, 2)):
                volume = _box_volume(cfg.frames, cfg.height, cfg.width, spare_rows,
                                     [(col, col + 2)] * cfg.frames)
                pred_masks[obj.id] = rle_encode(volume)
            for _ in range(n_spurious):
                pred_relations.append(TimedRelation(
                    phantom_a.id, phantom_b.id, "phantom-link", 0.0, 1.0))

        pred_scene = SceneGraph4D(
            tuple(pred_objects),
            {obj.id: pred_masks[obj.id] for obj in pred_objects},
            tuple(pred_relations),
        )
        pred = VideoAnnotation(
            video_id, cfg.duration, cfg.frames, cfg.width, cfg.height, pred_scene,
            confidences=tuple(range(1, len(pred_relations) + 1)),
        )
        videos.append(SyntheticVideo(
            gold=gold, pred=pred,
            bookkeeping=VideoBookkeeping(video_id, tuple(records), n_spurious),
        ))
    return videos


def corpus_vocab(videos: list[SyntheticVideo]) -> tuple[dict, dict]:
    """Vocabulary sets and frequency tables of the gold corpus."""
    object_freq: dict[str, int] = {}
    predicate_freq: dict[str, int] = {}
    for video in videos:
        for obj in video.gold.scene.objects:
            object_freq[obj.category] = object_freq.get(obj.category, 0) + 1
        for rel in video.gold.scene.relations:
            predicate_freq[rel.predicate] = predicate_freq.get(rel.predicate, 0) + 1
    vocab = {"objects": set(object_freq), "predicates": set(predicate_freq)}
    freq = {"objects": object_freq, "predicates": predicate_freq}
    return vocab, freq
