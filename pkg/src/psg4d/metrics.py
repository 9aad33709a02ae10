"""Evaluation stack: grounded matching, R@K, mR@K, stage and split reports.

Matching is greedy, rank-ordered, and injective: predictions are walked in
rank order and each takes the first compatible, still-unmatched gold
relation. A pair is compatible when normalized subject/object categories
and predicate agree, endpoint tube IoUs clear the threshold when grounding
is on, and the interval IoU of the spans clears the temporal threshold
when that gate is enabled.

Dataset R@K is a macro average of per-video recalls. mR@K pools each
predicate class across the dataset and averages the per-class recalls;
classes absent from the gold annotations are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .masks import tube_iou
from .scene import (
    SceneGraph4D,
    TimedRelation,
    interval_iou,
    normalize_label,
)

__all__ = [
    "MatchConfig",
    "ScenePair",
    "MatchResult",
    "EvalReport",
    "SplitReport",
    "match_scene",
    "recall_at_k",
    "stage_metrics",
    "split_report",
    "report_lines",
]

DEFAULT_KS = (20, 50, 100)


@dataclass(frozen=True)
class MatchConfig:
    """Knobs of the matching protocol.

    ``temporal_iou_threshold`` of 0 disables the temporal gate; the
    quintuple-level stage metric uses 0.5.
    """

    viou_threshold: float = 0.5
    temporal_iou_threshold: float = 0.0
    ks: tuple[int, ...] = DEFAULT_KS
    grounded: bool = True

    def __post_init__(self):
        if not 0.0 <= self.viou_threshold <= 1.0:
            raise ValueError("viou_threshold must lie in [0, 1]")
        if not 0.0 <= self.temporal_iou_threshold <= 1.0:
            raise ValueError("temporal_iou_threshold must lie in [0, 1]")
        ks = tuple(int(k) for k in self.ks)
        if not ks or any(k <= 0 for k in ks) or list(ks) != sorted(ks):
            raise ValueError("ks must be positive and sorted ascending")
        object.__setattr__(self, "ks", ks)


@dataclass(frozen=True)
class ScenePair:
    """One video's predicted and gold graphs, ready for scoring.

    ``pred_ranks`` optionally carries per-relation ordinal ranks (1 is
    most confident); without it, list order is the rank order.
    """

    video_id: str
    pred: SceneGraph4D
    gold: SceneGraph4D
    pred_ranks: tuple[int | None, ...] | None = None


@dataclass(frozen=True)
class MatchResult:
    """Injective matching of top-k predictions onto gold relations."""

    k: int
    pairs: tuple[tuple[int, int], ...]  # (prediction index, gold index)

    @property
    def matched_gold(self) -> set[int]:
        return {g for _, g in self.pairs}


@dataclass
class EvalReport:
    """Recall numbers (percentages) plus the trace of who matched whom."""

    ks: tuple[int, ...]
    recall: dict[int, float]
    mean_recall: dict[int, float]
    per_predicate: dict[str, dict[int, float]]
    per_video: dict[str, dict[int, float]]
    matches: dict[str, dict[int, MatchResult]] = field(default_factory=dict)


@dataclass
class SplitReport:
    """Recall partitioned by vocabulary membership and frequency rank.

    Values are percentages; a partition with no gold items is None
    (absent), never zero.
    """

    seen: dict[str, float | None]
    unseen: dict[str, float | None]
    head: dict[str, float | None]
    body: dict[str, float | None]
    tail: dict[str, float | None]


@lru_cache(maxsize=4096)
def _category(label: str) -> str:
    return normalize_label(label)[0]


@lru_cache(maxsize=4096)
def _predicate_key(predicate: str) -> str:
    # predicates keep their wording; only whitespace/case are canonicalized
    return " ".join(predicate.strip().lower().split())


def _ordered_predictions(pair: ScenePair) -> list[int]:
    indices = list(range(len(pair.pred.relations)))
    ranks = pair.pred_ranks
    if ranks is not None and any(r is not None for r in ranks):
        indices.sort(key=lambda i: (ranks[i] is None, ranks[i] if ranks[i] is not None else 0, i))
    return indices


def _endpoint_iou_ok(pred_scene, gold_scene, pred_id, gold_id, threshold, cache) -> bool:
    key = (pred_id, gold_id)
    if key not in cache:
        pred_tube = pred_scene.masks.get(pred_id)
        gold_tube = gold_scene.masks.get(gold_id)
        if pred_tube is None or gold_tube is None:
            cache[key] = 0.0
        else:
            cache[key] = tube_iou(pred_tube, gold_tube)
    return cache[key] >= threshold


def _compatible(pred_rel: TimedRelation, gold_rel: TimedRelation, pair: ScenePair,
                cfg: MatchConfig, iou_cache) -> bool:
    pred_subject = pair.pred.by_id(pred_rel.subject_id)
    pred_object = pair.pred.by_id(pred_rel.object_id)
    gold_subject = pair.gold.by_id(gold_rel.subject_id)
    gold_object = pair.gold.by_id(gold_rel.object_id)
    if None in (pred_subject, pred_object, gold_subject, gold_object):
        return False
    if _category(pred_subject.category) != _category(gold_subject.category):
        return False
    if _category(pred_object.category) != _category(gold_object.category):
        return False
    if _predicate_key(pred_rel.predicate) != _predicate_key(gold_rel.predicate):
        return False
    if cfg.grounded:
        if not _endpoint_iou_ok(pair.pred, pair.gold, pred_rel.subject_id,
                                gold_rel.subject_id, cfg.viou_threshold, iou_cache):
            return False
        if not _endpoint_iou_ok(pair.pred, pair.gold, pred_rel.object_id,
                                gold_rel.object_id, cfg.viou_threshold, iou_cache):
            return False
    if cfg.temporal_iou_threshold > 0.0:
        t_iou = interval_iou(pred_rel.t_s, pred_rel.t_e, gold_rel.t_s, gold_rel.t_e)
        if t_iou < cfg.temporal_iou_threshold:
            return False
    return True


def match_scene(pair: ScenePair, cfg: MatchConfig, k: int,
                iou_cache: dict | None = None) -> MatchResult:
    """Greedily match the top-k predictions onto gold relations."""
    if iou_cache is None:
        iou_cache = {}
    order = _ordered_predictions(pair)[:k]
    taken: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for pred_index in order:
        pred_rel = pair.pred.relations[pred_index]
        for gold_index, gold_rel in enumerate(pair.gold.relations):
            if gold_index in taken:
                continue
            if _compatible(pred_rel, gold_rel, pair, cfg, iou_cache):
                taken.add(gold_index)
                pairs.append((pred_index, gold_index))
                break
    return MatchResult(k=k, pairs=tuple(pairs))


def _evaluate_video(pair: ScenePair, cfg: MatchConfig) -> dict[int, MatchResult]:
    iou_cache: dict = {}
    return {k: match_scene(pair, cfg, k, iou_cache) for k in cfg.ks}


def recall_at_k(pairs: list[ScenePair], cfg: MatchConfig, jobs: int = 1) -> EvalReport:
    """Score a dataset of scene pairs at every configured K.

    ``jobs`` fans the per-video matching out over a thread pool; results
    are merged in video-id order either way, so the report is identical.
    """
    pairs = sorted(pairs, key=lambda p: p.video_id)
    ids = [p.video_id for p in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate video ids in the evaluation set")
    if jobs > 1 and len(pairs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            all_matches = list(pool.map(lambda p: _evaluate_video(p, cfg), pairs))
    else:
        all_matches = [_evaluate_video(pair, cfg) for pair in pairs]

    per_video: dict[str, dict[int, float]] = {}
    matches: dict[str, dict[int, MatchResult]] = {}
    class_matched: dict[int, dict[str, int]] = {k: {} for k in cfg.ks}
    class_total: dict[str, int] = {}

    for pair, video_matches in zip(pairs, all_matches):
        total_gold = len(pair.gold.relations)
        for rel in pair.gold.relations:
            key = _predicate_key(rel.predicate)
            class_total[key] = class_total.get(key, 0) + 1
        video_recalls: dict[int, float] = {}
        for k in cfg.ks:
            result = video_matches[k]
            if total_gold > 0:
                video_recalls[k] = 100.0 * len(result.pairs) / total_gold
            for _, gold_index in result.pairs:
                key = _predicate_key(pair.gold.relations[gold_index].predicate)
                class_matched[k][key] = class_matched[k].get(key, 0) + 1
        if total_gold > 0:
            per_video[pair.video_id] = video_recalls
        matches[pair.video_id] = video_matches

    recall: dict[int, float] = {}
    mean_recall: dict[int, float] = {}
    per_predicate: dict[str, dict[int, float]] = {name: {} for name in sorted(class_total)}
    for k in cfg.ks:
        video_values = [per_video[v][k] for v in sorted(per_video)]
        recall[k] = sum(video_values) / len(video_values) if video_values else 0.0
        class_values = []
        for name in sorted(class_total):
            value = 100.0 * class_matched[k].get(name, 0) / class_total[name]
            per_predicate[name][k] = value
            class_values.append(value)
        mean_recall[k] = sum(class_values) / len(class_values) if class_values else 0.0

    return EvalReport(
        ks=cfg.ks,
        recall=recall,
        mean_recall=mean_recall,
        per_predicate=per_predicate,
        per_video=per_video,
        matches=matches,
    )


# -- per-stage scoring of a chained-inference transcript -----------------

def _greedy_count(pred_items: list, gold_items: list, compatible) -> int:
    taken: set[int] = set()
    matched = 0
    for pred in pred_items:
        for index, gold in enumerate(gold_items):
            if index in taken:
                continue
            if compatible(pred, gold):
                taken.add(index)
                matched += 1
                break
    return matched


def _unordered_pair(a: str, b: str) -> tuple[str, str]:
    pa, pb = _category(a), _category(b)
    return (pa, pb) if pa <= pb else (pb, pa)


def stage_metrics(transcript, gold: SceneGraph4D, cfg: MatchConfig | None = None,
                  k: int = 20) -> dict[int, float]:
    """R@k of each chained-inference stage against a gold scene.

    Stage 1 scores object categories, stage 2 unordered endpoint pairs,
    stage 3 label triplets, and stage 4 full quintuples with an interval
    IoU gate of 0.5. Grounding applies only where the transcript carries
    masks, which desk-scale transcripts do not.
    """
    if cfg is None:
        cfg = MatchConfig(grounded=False)
    out: dict[int, float] = {}
    id_to_category = {obj.id: _category(obj.category) for obj in gold.objects}

    # stage 1: category-level object recall
    gold_categories = [_category(obj.category) for obj in gold.objects]
    pred_categories = []
    for _, label in transcript.stage1[:k]:
        try:
            pred_categories.append(_category(label))
        except Exception:
            continue
    matched = _greedy_count(pred_categories, gold_categories, lambda p, g: p == g)
    out[1] = 100.0 * matched / len(gold_categories) if gold_categories else 0.0

    # stage 2: unordered endpoint-pair recall over the distinct gold pairs
    gold_pairs = sorted({
        _unordered_pair(id_to_category[rel.subject_id], id_to_category[rel.object_id])
        for rel in gold.relations
        if rel.subject_id in id_to_category and rel.object_id in id_to_category
    })
    pred_pairs = {_unordered_pair(a, b) for a, b in transcript.stage2[:k]}
    matched = sum(1 for pair in gold_pairs if pair in pred_pairs)
    out[2] = 100.0 * matched / len(gold_pairs) if gold_pairs else 0.0

    # stage 3: label-triplet recall over gold relations
    gold_triplets = [
        (id_to_category[rel.subject_id], _predicate_key(rel.predicate), id_to_category[rel.object_id])
        for rel in gold.relations
        if rel.subject_id in id_to_category and rel.object_id in id_to_category
    ]
    pred_triplets = [
        (_category(s), _predicate_key(p), _category(o))
        for s, p, o in transcript.stage3[:k]
    ]
    matched = _greedy_count(pred_triplets, gold_triplets, lambda p, g: p == g)
    out[3] = 100.0 * matched / len(gold_triplets) if gold_triplets else 0.0

    # stage 4: triplet plus temporal gate at interval IoU 0.5
    gold_quintuples = [
        (
            id_to_category[rel.subject_id],
            _predicate_key(rel.predicate),
            id_to_category[rel.object_id],
            rel.t_s,
            rel.t_e,
        )
        for rel in gold.relations
        if rel.subject_id in id_to_category and rel.object_id in id_to_category
    ]
    pred_quintuples = [
        (_category(q.subject_label), _predicate_key(q.predicate_label), _category(q.object_label), q.t_s, q.t_e)
        for q in transcript.final[:k]
    ]

    def quintuple_match(p, g):
        if p[:3] != g[:3]:
            return False
        return interval_iou(p[3], p[4], g[3], g[4]) >= 0.5

    matched = _greedy_count(pred_quintuples, gold_quintuples, quintuple_match)
    out[4] = 100.0 * matched / len(gold_quintuples) if gold_quintuples else 0.0
    return out


# -- seen/unseen and head/body/tail splits -------------------------------

def _tercile_partition(freq: dict[str, int]) -> tuple[set[str], set[str], set[str]]:
    """Rank categories by training frequency and cut into three groups."""
    ordered = sorted(freq, key=lambda name: (-freq[name], name))
    n = len(ordered)
    first = -(-n // 3)  # ceil
    second = -(-2 * n // 3)
    return set(ordered[:first]), set(ordered[first:second]), set(ordered[second:])


def _ratio(matched: int, total: int) -> float | None:
    if total == 0:
        return None
    return 100.0 * matched / total


def split_report(pairs: list[ScenePair], cfg: MatchConfig,
                 vocab: dict[str, set[str]],
                 freq: dict[str, dict[str, int]] | None = None) -> SplitReport:
    """Partition recall by training-vocabulary membership and frequency.

    ``vocab`` maps "objects"/"predicates" to training label sets; ``freq``
    maps them to training frequency tables. Object recall counts gold
    objects recovered by category-level (optionally grounded) matching;
    predicate recall counts gold relations recovered at the largest K.
    """
    object_vocab = {_category(v) for v in vocab.get("objects", set())}
    predicate_vocab = {_predicate_key(v) for v in vocab.get("predicates", set())}
    freq = freq or {}
    object_freq = {_category(k): v for k, v in freq.get("objects", {}).items()}
    predicate_freq = {_predicate_key(k): v for k, v in freq.get("predicates", {}).items()}

    counters: dict[tuple[str, str], list[int]] = {}

    def bump(partition: str, kind: str, matched: bool):
        entry = counters.setdefault((partition, kind), [0, 0])
        entry[1] += 1
        if matched:
            entry[0] += 1

    obj_head, obj_body, obj_tail = _tercile_partition(object_freq)
    pred_head, pred_body, pred_tail = _tercile_partition(predicate_freq)
    k = max(cfg.ks)

    for pair in sorted(pairs, key=lambda p: p.video_id):
        iou_cache: dict = {}
        # object-level: greedy injective category matching
        taken: set[int] = set()
        matched_gold_objects: set[int] = set()
        for pred_obj in pair.pred.objects:
            for gold_obj in pair.gold.objects:
                if gold_obj.id in taken:
                    continue
                if _category(pred_obj.category) != _category(gold_obj.category):
                    continue
                if cfg.grounded and not _endpoint_iou_ok(
                        pair.pred, pair.gold, pred_obj.id, gold_obj.id,
                        cfg.viou_threshold, iou_cache):
                    continue
                taken.add(gold_obj.id)
                matched_gold_objects.add(gold_obj.id)
                break
        for gold_obj in pair.gold.objects:
            hit = gold_obj.id in matched_gold_objects
            category = _category(gold_obj.category)
            bump("seen" if category in object_vocab else "unseen", "object", hit)
            if category in obj_head:
                bump("head", "object", hit)
            elif category in obj_body:
                bump("body", "object", hit)
            elif category in obj_tail:
                bump("tail", "object", hit)

        # relation-level: reuse the headline matching at the largest K
        result = match_scene(pair, cfg, k, iou_cache)
        matched_gold = result.matched_gold
        for index, rel in enumerate(pair.gold.relations):
            hit = index in matched_gold
            predicate = _predicate_key(rel.predicate)
            bump("seen" if predicate in predicate_vocab else "unseen", "predicate", hit)
            if predicate in pred_head:
                bump("head", "predicate", hit)
            elif predicate in pred_body:
                bump("body", "predicate", hit)
            elif predicate in pred_tail:
                bump("tail", "predicate", hit)

    def section(partition: str) -> dict[str, float | None]:
        return {
            kind: _ratio(*counters[(partition, kind)]) if (partition, kind) in counters else None
            for kind in ("object", "predicate")
        }

    return SplitReport(
        seen=section("seen"),
        unseen=section("unseen"),
        head=section("head"),
        body=section("body"),
        tail=section("tail"),
    )


def report_lines(report: EvalReport, stages: dict[int, float] | None = None,
                 splits: SplitReport | None = None) -> list[str]:
    """Flatten reports into the key=value interchange lines."""
    lines: list[str] = []
    for k in report.ks:
        lines.append(f"R@{k}={report.recall[k]}")
    for k in report.ks:
        lines.append(f"mR@{k}={report.mean_recall[k]}")
    for name in sorted(report.per_predicate):
        for k in report.ks:
            lines.append(f"predicate/{name}/R@{k}={report.per_predicate[name][k]}")
    if stages is not None:
        for stage in sorted(stages):
            lines.append(f"stage{stage}/R@20={stages[stage]}")
    if splits is not None:
        for partition in ("seen", "unseen", "head", "body", "tail"):
            section = getattr(splits, partition)
            for kind in ("object", "predicate"):
                value = section.get(kind)
                if value is not None:
                    lines.append(f"split/{partition}/{kind}={value}")
    return lines
