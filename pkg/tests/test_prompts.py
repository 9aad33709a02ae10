import pytest

from psg4d.inference.prompts import (
    STAGE_HEADERS,
    MissingStageError,
    SceneDescriptor,
    build_prompt,
)


def test_full_prompt_contains_headers_in_order():
    prompt = build_prompt("full", examples=0)
    positions = [prompt.find(header) for header in STAGE_HEADERS]
    assert all(p >= 0 for p in positions)
    assert positions == sorted(positions)
    assert "Inference stage 1: Object Description and Categorization" in prompt
    assert "Inference stage 4: Temporal Span Determination" in prompt


def test_prompt_opens_with_role_instruction():
    prompt = build_prompt("full", examples=0)
    assert prompt.startswith("You are a scene expert")


def test_one_example_appends_first_worked_example():
    prompt = build_prompt("full", examples=1)
    assert "[Example-1]" in prompt
    assert "(Person 1, running toward, Person 2, 0.2, 0.8)" in prompt
    assert "[Example-2]" not in prompt


def test_two_examples_appends_both():
    prompt = build_prompt("full", examples=2)
    assert "[Example-1]" in prompt
    assert "[Example-2]" in prompt


def test_determinism():
    scene = SceneDescriptor(reference="clip-7", duration=12.5)
    first = build_prompt(2, scene, prior={1: "stage one text"}, examples=1)
    second = build_prompt(2, scene, prior={1: "stage one text"}, examples=1)
    assert first == second


def test_scene_descriptor_rendered():
    prompt = build_prompt("full", SceneDescriptor(reference="clip-7", duration=12.5))
    assert "Input Data: 4D Scene clip-7, the duration 12.5" in prompt


def test_stage_prompt_includes_prior_sections():
    prompt = build_prompt(3, "x", prior={1: "objects here", 2: "pairs here"}, examples=0)
    assert "objects here" in prompt
    assert "pairs here" in prompt
    assert prompt.rstrip().endswith(STAGE_HEADERS[2])


def test_missing_prior_stage_rejected():
    with pytest.raises(MissingStageError):
        build_prompt(3, "x", prior={1: "objects"}, examples=0)


def test_bad_stage_and_example_count_rejected():
    with pytest.raises(ValueError):
        build_prompt(5, "x")
    with pytest.raises(ValueError):
        build_prompt("full", examples=9)
