"""Prompt construction for the four-stage chained scene-graph inference.

Rendering is deterministic: identical inputs produce byte-identical
prompts. The full prompt always carries the four stage headers in order,
starting with object description and categorization.
"""

from __future__ import annotations

from dataclasses import dataclass

from .examples import WORKED_EXAMPLES, WorkedExample

__all__ = [
    "STAGE_HEADERS",
    "STAGE_NAMES",
    "SceneDescriptor",
    "PromptTemplate",
    "MissingStageError",
    "build_prompt",
]

STAGE_NAMES = (
    "Object Description and Categorization",
    "Semantic Relation Identification",
    "Precise Relation Description",
    "Temporal Span Determination",
)

STAGE_HEADERS = tuple(
    f"Inference stage {n}: {name}" for n, name in enumerate(STAGE_NAMES, start=1)
)

_STAGE_BODIES = (
    "For each object in the scene, do not immediately output its name. "
    "Instead, start by describing each object in detail. Provide a "
    "description of each object based on its appearance, shape, structure, "
    "and any unique characteristics observed in the scene. After giving a "
    "detailed description, assign a category to the object that best fits "
    "the objects (e.g., \"person\", \"table\", \"chair\", etc.).\n"
    "Expected Output: (description, object_1), ...",
    "Based on the identified objects, analyze which pairs of objects may "
    "have semantic relations. Consider spatial positioning, interactions, "
    "and any logical connections that might exist between them. Identify "
    "only pairs that have a meaningful relationship and briefly explain "
    "why these pairs might be related.\n"
    "Expected Output: (object_i, object_j), ...",
    "For each object pair identified in Step 2, describe the exact nature "
    "of the relation between the two objects as precisely as possible. Use "
    "clear, concise language to specify the relation type (e.g., \"sitting "
    "on,\" \"holding,\" \"near,\" etc.) and provide additional context if "
    "necessary to ensure the relation is unambiguous.\n"
    "Expected Output: (object_i, relation_k object_j), ...",
    "For each identified relation, determine its duration or time span. "
    "Indicate if the relation is continuous, occurs intermittently, or "
    "exists only at a specific moment within the scene. Use a numerical "
    "value for the duration, such as a time interval (e.g., (0.1, 0.7) )\n"
    "Expected Output: (object_i, relation_k object_j, start_time, end_time), ...",
)

_INSTRUCTION = (
    "You are a scene expert with professional skills in generating an SG "
    "triplets sequence. You follow these four detailed steps to ensure a "
    "logical, step-by-step approach to SG generation:"
)

_FINAL_FORMAT = (
    "Final Output Format:\n"
    "For each object pair and relation, generate SG triplets in the following format:\n"
    "Expected Output: (object_i, relation_k object_j, start_time, end_time), ..."
)


class MissingStageError(ValueError):
    """A stage prompt was requested without the outputs it builds on."""


@dataclass(frozen=True)
class SceneDescriptor:
    """Opaque handle to the 4D scene handed to the generation backend.

    Desk-scale backends never see pixels; the reference string stands in
    for the encoded scene tokens.
    """

    reference: str = ""
    duration: float | None = None

    def render(self) -> str:
        text = "Input Data: 4D Scene"
        if self.reference:
            text += f" {self.reference}"
        text += ", the duration"
        if self.duration is not None:
            text += f" {self.duration}"
        return text


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction, stage blocks, and the pool of in-context examples."""

    instruction: str = _INSTRUCTION
    headers: tuple[str, ...] = STAGE_HEADERS
    bodies: tuple[str, ...] = _STAGE_BODIES
    examples: tuple[WorkedExample, ...] = WORKED_EXAMPLES

    def instruction_block(self) -> str:
        parts = [self.instruction, ""]
        for header, body in zip(self.headers, self.bodies):
            parts.append(f"{header}.")
            parts.append(body)
            parts.append("")
        parts.append(_FINAL_FORMAT)
        return "\n".join(parts)

    def render(self, stage: int | str, scene: SceneDescriptor,
               prior: dict[int, str] | None = None, examples: int = 1) -> str:
        prior = prior or {}
        if examples < 0 or examples > len(self.examples):
            raise ValueError(f"examples must lie in 0..{len(self.examples)}")
        if stage != "full":
            stage = int(stage)
            if stage not in (1, 2, 3, 4):
                raise ValueError("stage must be 1..4 or 'full'")
            for previous in range(1, stage):
                if previous not in prior:
                    raise MissingStageError(
                        f"stage {stage} prompt needs the stage {previous} output"
                    )

        parts = [self.instruction_block()]
        for ordinal in range(1, examples + 1):
            parts.append("")
            parts.append(self.examples[ordinal - 1].render(ordinal))
        parts.append("")
        parts.append(scene.render())
        if stage == "full":
            return "\n".join(parts) + "\n"
        for previous in range(1, stage):
            parts.append("")
            parts.append(self.headers[previous - 1])
            parts.append(prior[previous].strip())
        parts.append("")
        parts.append(self.headers[stage - 1])
        return "\n".join(parts) + "\n"


def build_prompt(stage: int | str, scene: SceneDescriptor | str = "",
                 prior: dict[int, str] | None = None, examples: int = 1,
                 template: PromptTemplate | None = None) -> str:
    """Render the prompt for one stage (or the whole protocol at once)."""
    if isinstance(scene, str):
        scene = SceneDescriptor(reference=scene)
    template = template or PromptTemplate()
    return template.render(stage, scene, prior, examples)
