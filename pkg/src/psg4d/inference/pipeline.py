"""The four-stage inference pipeline: prompt, generate, parse, validate.

Stages run strictly sequentially, each prompt carrying the rendered text
of the stages before it. Cross-stage validation never fails a run: items
that break the containment chain are dropped and reported as warnings,
because evaluation has to score whatever the backend produced.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from ..scene import (
    ObjectInstance,
    Quintuple,
    SceneGraph4D,
    TimedRelation,
    normalize_label,
)
from .backends import Backend, BackendRequest, BackendTransportError
from .parsing import parse_stage
from .prompts import STAGE_HEADERS, PromptTemplate, SceneDescriptor

log = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "InferenceTranscript",
    "PipelineBackendError",
    "run_pipeline",
    "validate_transcript",
    "assemble_scene",
]


@dataclass(frozen=True)
class PipelineConfig:
    examples: int = 1
    max_tokens: int = 1024
    temperature: float = 0.0
    single_call: bool = False


@dataclass
class InferenceTranscript:
    """Staged record of one chained-inference run."""

    stage1: list[tuple[str, str]] = field(default_factory=list)
    stage2: list[tuple[str, str]] = field(default_factory=list)
    stage3: list[tuple[str, str, str]] = field(default_factory=list)
    final: list[Quintuple] = field(default_factory=list)
    raw_texts: dict[int, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


class PipelineBackendError(RuntimeError):
    """Transport failure mid-run; carries the partial transcript.

    Retriable: the caller can resume from the recorded raw texts or simply
    rerun, since prompts are deterministic.
    """

    def __init__(self, message: str, transcript: InferenceTranscript):
        super().__init__(message)
        self.transcript = transcript


def _category_of(label: str) -> str:
    return normalize_label(label)[0]


def _unordered(a: str, b: str) -> tuple[str, str]:
    ca, cb = _category_of(a), _category_of(b)
    return (ca, cb) if ca <= cb else (cb, ca)


def validate_transcript(transcript: InferenceTranscript) -> InferenceTranscript:
    """Enforce the cross-stage containment chain, dropping violators.

    Stage 2 pairs must use stage 1 categories, stage 3 pairs must appear
    (unordered) among stage 2 pairs, and every final quintuple must extend
    a stage 3 triplet. Dropped items become warnings on the copy returned.
    """
    warnings = list(transcript.warnings)
    stage1_categories = {_category_of(label) for _, label in transcript.stage1}

    stage2: list[tuple[str, str]] = []
    for a, b in transcript.stage2:
        missing = [lbl for lbl in (a, b) if _category_of(lbl) not in stage1_categories]
        if missing:
            warnings.append(f"stage 2 pair ({a}, {b}) uses labels missing from stage 1: {missing}")
            continue
        stage2.append((a, b))

    stage2_pairs = {_unordered(a, b) for a, b in stage2}
    stage3: list[tuple[str, str, str]] = []
    for subject, predicate, object_ in transcript.stage3:
        if _category_of(subject) not in stage1_categories or _category_of(object_) not in stage1_categories:
            warnings.append(f"stage 3 triplet ({subject}, {predicate}, {object_}) uses labels missing from stage 1")
            continue
        if _unordered(subject, object_) not in stage2_pairs:
            warnings.append(f"stage 3 triplet ({subject}, {predicate}, {object_}) has no stage 2 pair")
            continue
        stage3.append((subject, predicate, object_))

    stage3_triplets = {(s, p, o) for s, p, o in stage3}
    final: list[Quintuple] = []
    for quintuple in transcript.final:
        if quintuple.triplet() not in stage3_triplets:
            warnings.append(
                f"final quintuple {quintuple.triplet()} does not extend any stage 3 triplet"
            )
            continue
        final.append(quintuple)
    final = [replace(q, confidence=rank) for rank, q in enumerate(final, start=1)]

    return InferenceTranscript(
        stage1=list(transcript.stage1),
        stage2=stage2,
        stage3=stage3,
        final=final,
        raw_texts=dict(transcript.raw_texts),
        warnings=warnings,
    )


def _split_single_response(text: str) -> dict[int, str]:
    """Carve a one-shot response into per-stage sections by header."""
    positions = []
    for stage, header in enumerate(STAGE_HEADERS, start=1):
        at = text.find(header)
        if at >= 0:
            positions.append((at, stage, at + len(header)))
    positions.sort()
    sections = {}
    for index, (_, stage, start) in enumerate(positions):
        end = positions[index + 1][0] if index + 1 < len(positions) else len(text)
        sections[stage] = text[start:end]
    return sections


def run_pipeline(scene: SceneDescriptor | str, backend: Backend,
                 cfg: PipelineConfig | None = None,
                 template: PromptTemplate | None = None) -> InferenceTranscript:
    """Run the four stages against a backend and return the transcript.

    Each stage's raw output is fed forward verbatim into the next prompt,
    mirroring how a generation model consumes its own context. The final
    transcript has the containment chain enforced.
    """
    if isinstance(scene, str):
        scene = SceneDescriptor(reference=scene)
    cfg = cfg or PipelineConfig()
    template = template or PromptTemplate()
    transcript = InferenceTranscript()

    def ask(prompt: str) -> str:
        request = BackendRequest(
            prompt=prompt, max_tokens=cfg.max_tokens, temperature=cfg.temperature,
        )
        try:
            return backend.generate(request).text
        except BackendTransportError as exc:
            raise PipelineBackendError(str(exc), transcript) from exc

    raw: dict[int, str] = {}
    if cfg.single_call:
        text = ask(template.render("full", scene, examples=cfg.examples))
        raw = _split_single_response(text)
        for stage in (1, 2, 3, 4):
            raw.setdefault(stage, "")
            transcript.raw_texts[stage] = raw[stage]
    else:
        for stage in (1, 2, 3, 4):
            prompt = template.render(stage, scene, prior=raw, examples=cfg.examples)
            raw[stage] = ask(prompt)
            transcript.raw_texts[stage] = raw[stage]

    known_labels: list[str] = []
    for stage in (1, 2, 3, 4):
        parsed = parse_stage(stage, raw.get(stage, ""), known_labels or None)
        transcript.warnings.extend(parsed.warnings)
        if stage == 1:
            transcript.stage1 = parsed.items
            known_labels = [label for _, label in parsed.items]
        elif stage == 2:
            transcript.stage2 = parsed.items
        elif stage == 3:
            transcript.stage3 = parsed.items
        else:
            transcript.final = parsed.items

    return validate_transcript(transcript)


def assemble_scene(transcript: InferenceTranscript,
                   mask_provider=None) -> tuple[SceneGraph4D, list[str]]:
    """Build a label-level scene graph from the final quintuples.

    Objects are created per distinct (category, index) label in order of
    first appearance. Masks are attached only when a provider is given;
    the provider maps a display label to a mask tube or None.
    """
    warnings: list[str] = []
    objects: list[ObjectInstance] = []
    ids: dict[tuple[str, int | None], int] = {}

    def object_id(label: str) -> int:
        key = normalize_label(label)
        if key not in ids:
            ids[key] = len(ids) + 1
            objects.append(ObjectInstance(ids[key], key[0], key[1]))
        return ids[key]

    relations: list[TimedRelation] = []
    for quintuple in transcript.final:
        subject_id = object_id(quintuple.subject_label)
        target_id = object_id(quintuple.object_label)
        if subject_id == target_id:
            warnings.append(f"self-relation dropped: {quintuple.triplet()}")
            continue
        relations.append(TimedRelation(
            subject_id=subject_id,
            object_id=target_id,
            predicate=quintuple.predicate_label,
            t_s=quintuple.t_s,
            t_e=quintuple.t_e,
        ))

    masks = {}
    if mask_provider is not None:
        for obj in objects:
            tube = mask_provider(obj.label)
            if tube is not None:
                masks[obj.id] = tube

    return SceneGraph4D(objects=tuple(objects), masks=masks, relations=tuple(relations)), warnings
