from hypothesis import given, settings, strategies as st

from psg4d.inference.examples import EXAMPLE_1, EXAMPLE_2
from psg4d.inference.parsing import (
    parse_output_sequence,
    parse_stage,
    serialize_quintuples,
)
from psg4d.scene import Quintuple


class TestStage1:
    def test_block_format(self):
        parsed = parse_stage(1, EXAMPLE_1.stage_texts[0])
        assert [label for _, label in parsed.items] == ["person", "person", "field", "ground"]
        assert parsed.items[0][0].startswith("A person wearing a white T-shirt")
        assert parsed.warnings == []

    def test_tuple_format_with_commas_in_description(self):
        text = "(A tall, narrow lamp with a brass base, Lamp)\n(A worn rug, Rug)"
        parsed = parse_stage(1, text)
        assert parsed.items == [
            ("A tall, narrow lamp with a brass base", "lamp"),
            ("A worn rug", "rug"),
        ]

    def test_empty_text_warns(self):
        parsed = parse_stage(1, "")
        assert parsed.items == []
        assert parsed.warnings


class TestStage2:
    def test_worked_example_pairs(self):
        parsed = parse_stage(2, EXAMPLE_2.stage_texts[1])
        assert len(parsed.items) == 6
        assert parsed.items[0] == ("person 1", "person 2")
        assert parsed.items[-1] == ("railroad track", "industrial building")

    def test_explanation_parentheses_ignored(self):
        text = "(Person, Ground) - The runner (Object 1) is on the path (Object 3)."
        parsed = parse_stage(2, text)
        assert parsed.items == [("person", "ground")]

    def test_multiple_pairs_on_one_line(self):
        parsed = parse_stage(2, "(a, b), (c, d)")
        assert parsed.items == [("a", "b"), ("c", "d")]


class TestStage3:
    def test_worked_example_triplets(self):
        parsed = parse_stage(3, EXAMPLE_2.stage_texts[2])
        assert len(parsed.items) == 7
        assert parsed.items[0] == ("person 1", "in front of", "person 2")
        assert parsed.items[2] == ("person 1", "walking on", "gravel")

    def test_two_field_variant_with_index(self):
        parsed = parse_stage(3, "(Person 1, running toward Person 2)")
        assert parsed.items == [("person 1", "running toward", "person 2")]

    def test_two_field_variant_plain_object(self):
        parsed = parse_stage(3, "(person, holding cup)")
        assert parsed.items == [("person", "holding", "cup")]

    def test_two_field_variant_with_known_labels(self):
        parsed = parse_stage(3, "(Person 1, standing next to Railroad Track)",
                             known_labels=["person", "railroad track"])
        assert parsed.items == [("person 1", "standing next to", "railroad track")]


class TestStage4:
    def test_labeled_times(self):
        parsed = parse_stage(4, "(Person 1, running toward, Person 2, start time: 0.2, end time: 0.8)")
        assert parsed.items == [Quintuple("person 1", "running toward", "person 2", 0.2, 0.8, 1)]

    def test_plain_times(self):
        parsed = parse_stage(4, EXAMPLE_1.final_text)
        assert len(parsed.items) == 4
        assert parsed.items[3] == Quintuple("ground", "part of", "field", 0.0, 1.0, 4)

    def test_out_of_range_span_clamped_with_warning(self):
        parsed = parse_stage(4, "(a, near, b, -0.5, 1.5)")
        assert parsed.items[0].t_s == 0.0
        assert parsed.items[0].t_e == 1.0
        assert any("clamped" in w for w in parsed.warnings)

    def test_reversed_span_swapped(self):
        parsed = parse_stage(4, "(a, near, b, 0.9, 0.1)")
        assert (parsed.items[0].t_s, parsed.items[0].t_e) == (0.1, 0.9)

    def test_garbage_times_skipped(self):
        parsed = parse_stage(4, "(a, near, b, soon, later)")
        assert parsed.items == []
        assert parsed.warnings

    def test_four_field_variant(self):
        parsed = parse_stage(4, "(person, holding cup, 0.1, 0.5)")
        assert parsed.items == [Quintuple("person", "holding", "cup", 0.1, 0.5, 1)]


class TestRobustness:
    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 4), st.text(max_size=400))
    def test_parse_stage_never_raises(self, stage, text):
        parsed = parse_stage(stage, text)
        assert isinstance(parsed.items, list)

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=300))
    def test_sequence_parse_never_raises(self, text):
        parsed = parse_output_sequence(text)
        assert isinstance(parsed.quintuples, list)


class TestSerializeRoundTrip:
    def test_fixed_point(self):
        quintuples = parse_stage(4, EXAMPLE_2.final_text).items
        text = serialize_quintuples(quintuples)
        again = parse_stage(4, text).items
        assert again == quintuples
        assert serialize_quintuples(again) == text

    def test_empty(self):
        assert serialize_quintuples([]) == ""


class TestOutputSequence:
    def test_single_clause(self):
        parsed = parse_output_sequence("person [Obj] holding cup [Obj] 0.1 0.5")
        assert len(parsed.quintuples) == 1
        q = parsed.quintuples[0]
        assert (q.subject_label, q.predicate_label, q.object_label) == ("person", "holding", "cup")
        assert (q.t_s, q.t_e) == (0.1, 0.5)
        assert parsed.trigger_positions == [1, 4]

    def test_two_clauses(self):
        text = "person [Obj] holding cup [Obj] 0.1 0.5 dog [Obj] near table [Obj] 0.0 1.0"
        parsed = parse_output_sequence(text)
        assert len(parsed.quintuples) == 2
        assert len(parsed.trigger_positions) == 4

    def test_missing_second_token_skipped(self):
        parsed = parse_output_sequence("person [Obj] holding cup 0.1 0.5")
        assert parsed.quintuples == []
        assert any("second signal token" in w for w in parsed.warnings)

    def test_missing_times_resyncs(self):
        text = "person [Obj] holding cup [Obj] dog [Obj] near table [Obj] 0.0 1.0"
        parsed = parse_output_sequence(text)
        assert any("time span" in w for w in parsed.warnings)

    def test_indexed_object_words(self):
        parsed = parse_output_sequence("Person 1 [Obj] running toward Person 2 [Obj] 0.2 0.8")
        q = parsed.quintuples[0]
        assert q.subject_label == "person 1"
        assert q.predicate_label == "running toward"
        assert q.object_label == "person 2"
