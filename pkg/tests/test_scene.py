import pytest
from hypothesis import given, strategies as st

from psg4d.scene import (
    LabelError,
    MaskTube,
    ObjectInstance,
    Quintuple,
    SceneGraph4D,
    TimedRelation,
    clamp_span,
    format_label,
    interval_iou,
    normalize_label,
    validate_scene,
)


class TestNormalizeLabel:
    def test_spaced_index(self):
        assert normalize_label("Person 1") == ("person", 1)

    def test_plain_category(self):
        assert normalize_label("gravel") == ("gravel", None)

    def test_hyphenated_index(self):
        assert normalize_label("road-barrier-295") == ("road-barrier", 295)

    def test_whitespace_collapse(self):
        assert normalize_label("  Railroad   Track ") == ("railroad track", None)

    def test_empty_raises(self):
        with pytest.raises(LabelError):
            normalize_label("   ")

    def test_bare_number_keeps_category(self):
        assert normalize_label("295") == ("295", None)

    @given(st.text(min_size=1).filter(lambda s: s.strip()))
    def test_idempotent(self, raw):
        try:
            first = normalize_label(raw)
        except LabelError:
            return
        again = normalize_label(format_label(*first))
        assert again == first


class TestSpans:
    def test_clamp_out_of_range(self):
        t_s, t_e, warnings = clamp_span(-0.5, 1.5)
        assert (t_s, t_e) == (0.0, 1.0)
        assert warnings

    def test_reversed_swapped(self):
        t_s, t_e, warnings = clamp_span(0.9, 0.2)
        assert (t_s, t_e) == (0.2, 0.9)
        assert any("reversed" in w for w in warnings)

    def test_relation_construction_clamps(self):
        rel = TimedRelation(1, 2, "near", 1.4, -0.2)
        assert (rel.t_s, rel.t_e) == (0.0, 1.0)

    def test_quintuple_construction_clamps(self):
        q = Quintuple("a", "near", "b", 0.8, 0.3)
        assert (q.t_s, q.t_e) == (0.3, 0.8)

    def test_self_relation_rejected(self):
        with pytest.raises(ValueError):
            TimedRelation(3, 3, "near", 0.0, 1.0)


class TestIntervalIou:
    def test_identical(self):
        assert interval_iou(0.2, 0.8, 0.2, 0.8) == 1.0

    def test_disjoint(self):
        assert interval_iou(0.0, 0.2, 0.5, 1.0) == 0.0

    def test_half_overlap(self):
        assert interval_iou(0.0, 0.5, 0.25, 0.75) == pytest.approx(1 / 3)

    def test_degenerate_identical(self):
        assert interval_iou(0.5, 0.5, 0.5, 0.5) == 1.0


def _tube(frames=2, width=2, height=2, empty=True):
    area = width * height
    runs = tuple((area,) if empty else (0, area) for _ in range(frames))
    return MaskTube(frames=frames, width=width, height=height, runs=runs)


class TestValidateScene:
    def test_well_formed_scene(self):
        scene = SceneGraph4D(
            objects=(ObjectInstance(1, "person"), ObjectInstance(2, "cup")),
            masks={1: _tube(), 2: _tube()},
            relations=(TimedRelation(1, 2, "holding", 0.0, 1.0),),
        )
        assert validate_scene(scene) == []

    def test_dangling_relation(self):
        scene = SceneGraph4D(
            objects=(ObjectInstance(1, "person"),),
            relations=(TimedRelation(1, 9, "holding", 0.0, 1.0),),
        )
        violations = validate_scene(scene)
        assert [v.code for v in violations] == ["dangling-object"]
        assert violations[0].subject == 9

    def test_duplicate_ids(self):
        scene = SceneGraph4D(objects=(ObjectInstance(1, "a"), ObjectInstance(1, "b")))
        assert any(v.code == "duplicate-object-id" for v in validate_scene(scene))

    def test_mask_for_unknown_object(self):
        scene = SceneGraph4D(objects=(), masks={5: _tube()})
        assert any(v.code == "mask-unknown-object" for v in validate_scene(scene))

    def test_tube_length_mismatch(self):
        import numpy as np
        from psg4d.scene import RGBDSequence

        seq = RGBDSequence(
            video_id="v",
            rgb_frames=tuple(np.zeros((2, 2, 3), dtype=np.uint8) for _ in range(4)),
            depth_frames=tuple(np.zeros((2, 2), dtype=np.uint16) for _ in range(4)),
            width=2, height=2, duration=1.0,
        )
        scene = SceneGraph4D(objects=(ObjectInstance(1, "a"),), masks={1: _tube(frames=3)})
        assert any(v.code == "tube-length-mismatch" for v in validate_scene(scene, seq))

    def test_corrupt_rle_reported(self):
        bad = MaskTube(frames=1, width=2, height=2, runs=((3,),))
        scene = SceneGraph4D(objects=(ObjectInstance(1, "a"),), masks={1: bad})
        assert any(v.code == "corrupt-rle" for v in validate_scene(scene))
