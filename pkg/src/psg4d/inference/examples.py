"""Worked chained-inference transcripts shipped with the prompt library.

Two complete runs: a baseball scene and a railroad scene. They serve both
as in-context demonstrations appended to prompts and as deterministic
replay scripts for the mock backend in tests and demos.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["WorkedExample", "EXAMPLE_1", "EXAMPLE_2", "WORKED_EXAMPLES"]


@dataclass(frozen=True)
class WorkedExample:
    """One full four-stage run plus its final plain-form output."""

    name: str
    stage_texts: tuple[str, str, str, str]
    final_text: str

    @property
    def script(self) -> tuple[str, str, str, str]:
        """Canned backend responses, one per stage."""
        return self.stage_texts

    def render(self, ordinal: int) -> str:
        """Render as an in-context block for prompt inclusion."""
        from .prompts import STAGE_HEADERS

        parts = [f"[Example-{ordinal}]", "Input Data: 4D Scene, the duration", ""]
        for header, text in zip(STAGE_HEADERS, self.stage_texts):
            parts.append(header)
            parts.append(text.strip())
            parts.append("")
        parts.append("Final Output Format:")
        parts.append(self.final_text.strip())
        return "\n".join(parts)


_EX1_STAGE1 = """\
Object 1:
Description: A person wearing a white T-shirt, gray pants, and black gloves. They are wearing a dark blue helmet and appear to be running on a sandy field.
Category: Person
Object 2:
Description: A person wearing a green shirt, gray pants, and a green baseball cap. They are holding a baseball glove and appear to be positioned slightly behind Object 1.
Category: Person
Object 3:
Description: A green outfield area with a mix of trees in the background.
Category: Field
Object 4:
Description: A sandy dirt area forming the base path of the field.
Category: Ground
"""

_EX1_STAGE2 = """\
(Person, Person) - The runner (Object 1) is running toward the fielder (Object 2), indicating a potential play interaction.
(Person, Ground) - The runner (Object 1) is running along the base path (Object 3).
(Person, Ground) - The fielder (Object 2) is positioned on or near the base path (Object 3).
(Ground, Field) - The Ground (Object 3) is part of the larger field (Object 4).
"""

_EX1_STAGE3 = """\
(Person 1, running toward, Person 2)
(Person 1, running along, Ground)
(Person 2, standing near, Ground)
(Ground, part of, Field)
"""

_EX1_STAGE4 = (
    "(Person 1, running toward, Person 2, start time: 0.2, end time: 0.8), "
    "(Person 1, running along, Ground, start time: 0.1, end time: 0.9), "
    "(Person 2, standing near, Ground, start time: 0.0, end time: 1.0), "
    "(Ground, part of, Field, start time: 0.0, end time: 1.0).\n"
)

_EX1_FINAL = """\
(Person 1, running toward, Person 2, 0.2, 0.8)
(Person 1, running along, Ground, 0.1, 0.9)
(Person 2, standing near, Ground, 0.0, 1.0)
(Ground, part of, Field, 0.0, 1.0)
"""

EXAMPLE_1 = WorkedExample(
    name="example-1",
    stage_texts=(_EX1_STAGE1, _EX1_STAGE2, _EX1_STAGE3, _EX1_STAGE4),
    final_text=_EX1_FINAL,
)


_EX2_STAGE1 = """\
Object 1:
Description: A person with short black hair, wearing a blue shirt, yellow pants, and gloves, standing on or near a railroad track, facing another person.
Category: Person
Object 2:
Description: A second person with short hair, wearing a dark jacket, bending forward near the railroad track, partially obscured in the foreground.
Category: Person
Object 3:
Description: A set of metal railroad tracks, extending through the scene, with parallel rails and wooden ties.
Category: Railroad Track
Object 4:
Description: A low concrete barrier running alongside the railroad track, separating the path from the track area.
Category: Road Barrier
Object 5:
Description: An industrial structure in the background, with metal and concrete components, possibly part of a factory or warehouse.
Category: Industrial Building
Object 6:
Description: There are irregularly shaped stones covering the ground near the railway tracks.
Category: gravel
"""

_EX2_STAGE2 = """\
(Person 1, Person 2) - Person 1 and Person 2 are positioned close to each other, suggesting a possible interaction or confrontation.
(Person 1, Railroad Track) - Person 1 is standing near or on the railroad track, indicating a spatial relationship.
(Person 2, Railroad Track) - Person 2 is positioned close to the railroad track, indicating proximity.
(Person 1, Road Barrier) - The person is positioned near the road barrier, suggesting a spatial relationship.
(Person 1, gravel) - The person is positioned on the gravel, suggesting a spatial relationship.
(Railroad Track, Industrial Building) - The railroad track leads towards or is located near the industrial building, indicating spatial context.
"""

_EX2_STAGE3 = """\
(Person 1, in front of, Person 2)
(Person 1, talking to, Person 2)
(Person 1, walking on, Gravel)
(Person 1, behind, Road Barrier)
(Person 1, walking alongside, Railroad Track)
(Person 2, walking alongside, Railroad Track)
(Railroad Track, near, Industrial Building)
"""

_EX2_STAGE4 = """\
(Person 1, in front of, Person 2, start time: 0.8, end time: 1.0)
(Person 1, talking to, Person 2, start time: 0.8, end time: 1.0)
(Person 1, walking on, Gravel, start time: 0, end time: 0.2)
(Person 1, behind, Road Barrier, start time: 0, end time: 0.2)
(Person 1, walking alongside, Railroad Track,  start time: 0.2, end time: 0.8)
(Person 2, walking alongside, Railroad Track,  start time: 0.8, end time: 1.0)
(Railroad Track, near, Industrial Building, start time: 0.1, end time: 0.6)
"""

_EX2_FINAL = (
    "(Person 1, in front of, Person 2, 0.8, 1.0),(Person 1, talking to, Person 2, 0.8, 1.0), "
    "(Person 1, walking on, Gravel, 0, 0.2), (Person 1, behind, Road Barrier, 0, 0.2), "
    "(Person 1, walking alongside, Railroad Track,  0.2, 0.8), "
    "(Person 2, walking alongside, Railroad Track,  0.8, 1.0), "
    "(Railroad Track, near, Industrial Building, 0.1, 0.6)\n"
)

EXAMPLE_2 = WorkedExample(
    name="example-2",
    stage_texts=(_EX2_STAGE1, _EX2_STAGE2, _EX2_STAGE3, _EX2_STAGE4),
    final_text=_EX2_FINAL,
)

WORKED_EXAMPLES: tuple[WorkedExample, ...] = (EXAMPLE_1, EXAMPLE_2)
