"""Parsers for chained-inference stage outputs and signal-token sequences.

Generation output is noisy, so nothing here raises on malformed text:
unparseable fragments are skipped and reported as warnings. Labels are
canonicalized on the way in; serializing parsed quintuples and reparsing
yields the same records.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..scene import LabelError, Quintuple, clamp_span, format_label, normalize_label

__all__ = [
    "StageParse",
    "SequenceParse",
    "parse_stage",
    "parse_output_sequence",
    "serialize_quintuples",
]

OBJ_TOKEN = "[Obj]"

_CATEGORY_LINE = re.compile(r"^\s*[*_#-]*\s*category\s*[*_]*\s*:\s*(.+?)\s*$", re.IGNORECASE)
_DESCRIPTION_LINE = re.compile(r"^\s*[*_#-]*\s*description\s*[*_]*\s*:\s*(.*?)\s*$", re.IGNORECASE)
_OBJECT_LINE = re.compile(r"^\s*[*_#-]*\s*object\s+\d+\s*[*_]*\s*:?\s*$", re.IGNORECASE)


@dataclass
class StageParse:
    """Parsed payload of one stage plus everything that went wrong."""

    stage: int
    items: list
    warnings: list[str] = field(default_factory=list)


@dataclass
class SequenceParse:
    """Quintuples and segmentation-trigger positions from a token stream."""

    quintuples: list[Quintuple]
    trigger_positions: list[int]
    warnings: list[str] = field(default_factory=list)


def _clean_predicate(raw: str) -> str:
    return " ".join(raw.strip().lower().split())


def _display(raw_label: str) -> str:
    return format_label(*normalize_label(raw_label))


def _line_tuples(line: str) -> list[list[str]]:
    """Extract leading parenthesized tuples from one line.

    Tuples are consumed greedily from the start; once prose begins (for
    example an explanation after a dash) the rest of the line is ignored,
    so parenthesized asides inside explanations never become records.
    """
    tuples: list[list[str]] = []
    pos = 0
    n = len(line)
    while pos < n:
        while pos < n and line[pos] in " \t-*,.;":
            # leading bullets and separators between tuples
            if line[pos] == "-" and tuples:
                return tuples  # dash after a tuple starts the explanation
            pos += 1
        if pos >= n or line[pos] != "(":
            break
        end = line.find(")", pos + 1)
        if end < 0:
            break
        inner = line[pos + 1:end]
        fields = [f.strip() for f in inner.split(",")]
        if any(fields):
            tuples.append(fields)
        pos = end + 1
    return tuples


def _parse_time(text: str) -> float | None:
    if ":" in text:
        text = text.rsplit(":", 1)[1]
    text = text.strip().strip(".")
    try:
        return float(text)
    except ValueError:
        return None


def _split_predicate_object(words: list[str], known_labels: list[str] | None) -> tuple[str, str] | None:
    """Split a "relation object" word run into its two parts.

    Prefers the longest suffix matching a known label; otherwise the object
    is the final word, pulling in the previous word when the final one is a
    bare instance index.
    """
    if len(words) < 2:
        return None
    if known_labels:
        known = set()
        for label in known_labels:
            try:
                known.add(normalize_label(label)[0])
            except LabelError:
                continue
        for start in range(1, len(words)):
            candidate = " ".join(words[start:])
            try:
                category, _ = normalize_label(candidate)
            except LabelError:
                continue
            if category in known:
                return " ".join(words[:start]), candidate
    object_words = [words[-1]]
    predicate_words = words[:-1]
    if words[-1].isdigit() and len(words) >= 3:
        object_words = words[-2:]
        predicate_words = words[:-2]
    if not predicate_words:
        return None
    return " ".join(predicate_words), " ".join(object_words)


def _parse_stage1_blocks(text: str) -> list[tuple[str, str]]:
    entries: list[tuple[str, str]] = []
    description_parts: list[str] = []
    collecting = False
    for line in text.splitlines():
        if _OBJECT_LINE.match(line):
            description_parts = []
            collecting = False
            continue
        category_match = _CATEGORY_LINE.match(line)
        if category_match:
            entries.append((" ".join(description_parts).strip(), category_match.group(1)))
            description_parts = []
            collecting = False
            continue
        description_match = _DESCRIPTION_LINE.match(line)
        if description_match:
            description_parts = [description_match.group(1)]
            collecting = True
            continue
        if collecting and line.strip():
            description_parts.append(line.strip())
    return entries


def parse_stage(stage: int, text: str, known_labels: list[str] | None = None) -> StageParse:
    """Parse one stage's raw output into its structured payload.

    Stage 1 yields (description, label) entries, stage 2 label pairs,
    stage 3 (subject, predicate, object) triplets, stage 4 quintuples.
    """
    if stage not in (1, 2, 3, 4):
        raise ValueError("stage must be 1..4")
    result = StageParse(stage=stage, items=[])
    text = text or ""

    if stage == 1:
        blocks = _parse_stage1_blocks(text)
        if blocks:
            for description, raw_label in blocks:
                try:
                    result.items.append((description, _display(raw_label)))
                except LabelError:
                    result.warnings.append(f"stage 1: unusable category {raw_label!r}")
        else:
            for line in text.splitlines():
                for fields in _line_tuples(line):
                    if len(fields) < 2:
                        result.warnings.append(f"stage 1: not a (description, label) tuple: {fields}")
                        continue
                    description = ", ".join(fields[:-1])
                    try:
                        result.items.append((description, _display(fields[-1])))
                    except LabelError:
                        result.warnings.append(f"stage 1: unusable category {fields[-1]!r}")
        if not result.items:
            result.warnings.append("stage 1: no objects parsed")
        return result

    rank = 0
    for line in text.splitlines():
        for fields in _line_tuples(line):
            if stage == 2:
                if len(fields) != 2:
                    result.warnings.append(f"stage 2: not a pair: {fields}")
                    continue
                try:
                    result.items.append((_display(fields[0]), _display(fields[1])))
                except LabelError:
                    result.warnings.append(f"stage 2: unusable label in {fields}")
            elif stage == 3:
                triplet = _canonical_triplet(fields, known_labels, result.warnings, stage=3)
                if triplet is not None:
                    result.items.append(triplet)
            else:
                record = _parse_stage4_fields(fields, known_labels, result.warnings)
                if record is not None:
                    rank += 1
                    result.items.append(Quintuple(
                        subject_label=record[0],
                        predicate_label=record[1],
                        object_label=record[2],
                        t_s=record[3],
                        t_e=record[4],
                        confidence=rank,
                    ))
    if not result.items:
        result.warnings.append(f"stage {stage}: nothing parsed")
    return result


def _canonical_triplet(fields: list[str], known_labels, warnings: list[str],
                       stage: int) -> tuple[str, str, str] | None:
    if len(fields) == 3:
        subject, predicate, object_ = fields
    elif len(fields) == 2:
        split = _split_predicate_object(fields[1].split(), known_labels)
        if split is None:
            warnings.append(f"stage {stage}: cannot split relation/object in {fields}")
            return None
        subject, (predicate, object_) = fields[0], split
    else:
        warnings.append(f"stage {stage}: not a triplet: {fields}")
        return None
    try:
        return (_display(subject), _clean_predicate(predicate), _display(object_))
    except LabelError:
        warnings.append(f"stage {stage}: unusable label in {fields}")
        return None


def _parse_stage4_fields(fields: list[str], known_labels, warnings: list[str]):
    if len(fields) < 4:
        warnings.append(f"stage 4: not a quintuple: {fields}")
        return None
    t_s = _parse_time(fields[-2])
    t_e = _parse_time(fields[-1])
    if t_s is None or t_e is None:
        warnings.append(f"stage 4: unparseable time span in {fields}")
        return None
    triplet = _canonical_triplet(fields[:-2], known_labels, warnings, stage=4)
    if triplet is None:
        return None
    t_s, t_e, span_warnings = clamp_span(t_s, t_e)
    for w in span_warnings:
        warnings.append(f"stage 4: {w}")
    return (*triplet, t_s, t_e)


def parse_output_sequence(text: str, known_labels: list[str] | None = None) -> SequenceParse:
    """Parse the signal-token output form.

    Each clause reads "subject [Obj] relation object [Obj] t_s t_e"; the
    token index of every consumed signal token is recorded so mask
    decoding can be associated with the right hidden states downstream.
    """
    tokens = (text or "").split()
    result = SequenceParse(quintuples=[], trigger_positions=[])
    n = len(tokens)
    position = 0
    rank = 0
    while position < n:
        try:
            first = tokens.index(OBJ_TOKEN, position)
        except ValueError:
            if any(t.strip() for t in tokens[position:]):
                result.warnings.append("trailing tokens without a signal token were ignored")
            break
        subject_words = tokens[position:first]
        try:
            second = tokens.index(OBJ_TOKEN, first + 1)
        except ValueError:
            result.warnings.append("clause missing its second signal token was skipped")
            break
        middle_words = tokens[first + 1:second]
        times = tokens[second + 1:second + 3]
        t_s = _parse_time(times[0]) if len(times) > 0 else None
        t_e = _parse_time(times[1]) if len(times) > 1 else None
        if t_s is None or t_e is None:
            result.warnings.append("clause missing its time span was skipped")
            position = second + 1
            continue
        position = second + 3
        if not subject_words:
            result.warnings.append("clause with an empty subject was skipped")
            continue
        split = _split_predicate_object(middle_words, known_labels)
        if split is None:
            result.warnings.append(
                f"clause with unsplittable relation/object {' '.join(middle_words)!r} was skipped"
            )
            continue
        predicate, object_label = split
        t_s, t_e, span_warnings = clamp_span(t_s, t_e)
        result.warnings.extend(span_warnings)
        try:
            rank += 1
            result.quintuples.append(Quintuple(
                subject_label=_display(" ".join(subject_words)),
                predicate_label=_clean_predicate(predicate),
                object_label=_display(object_label),
                t_s=t_s,
                t_e=t_e,
                confidence=rank,
            ))
        except (LabelError, ValueError) as exc:
            rank -= 1
            result.warnings.append(f"clause dropped: {exc}")
            continue
        result.trigger_positions.extend([first, second])
    return result


def _format_time(value: float) -> str:
    return str(value)


def serialize_quintuples(quintuples: list[Quintuple]) -> str:
    """Render quintuples in the canonical one-per-line plain form.

    Parsing the result reproduces the same records (ranks included), so
    this is the fixed-point serialization used in transcripts.
    """
    lines = [
        f"({q.subject_label}, {q.predicate_label}, {q.object_label}, "
        f"{_format_time(q.t_s)}, {_format_time(q.t_e)})"
        for q in quintuples
    ]
    return "\n".join(lines) + ("\n" if lines else "")
