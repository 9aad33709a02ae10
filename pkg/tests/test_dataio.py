import numpy as np
import pytest

from psg4d.dataio import (
    SchemaError,
    annotation_to_document,
    dataset_stats,
    document_to_annotation,
    load_annotation,
    load_annotation_dir,
    load_frames,
    save_annotation,
    save_frames,
)
from psg4d.scene import RGBDSequence
from psg4d.synth import SynthConfig, generate_synthetic


def _synth_annotations(seed=0, videos=6, **kwargs):
    return generate_synthetic(SynthConfig(seed=seed, videos=videos, **kwargs))


class TestDocumentRoundTrip:
    def test_save_load_identity_on_random_scenes(self, tmp_path):
        for index, video in enumerate(_synth_annotations(seed=4, videos=10,
                                                         label_noise=0.3, mask_jitter=0.3,
                                                         spurious_rate=0.3)):
            for kind, ann in (("gold", video.gold), ("pred", video.pred)):
                path = tmp_path / f"{kind}_{index}.json"
                save_annotation(path, ann)
                loaded = load_annotation(path)
                assert loaded == ann

    def test_document_shape(self):
        video = _synth_annotations(videos=1)[0]
        document = annotation_to_document(video.gold)
        assert document["schema"] == 1
        assert set(document) == {"schema", "video_id", "duration", "frames",
                                 "width", "height", "objects", "relations"}
        assert all("mask_rle" in o for o in document["objects"])


class TestSchemaValidation:
    def _document(self):
        return annotation_to_document(_synth_annotations(videos=1)[0].gold)

    def test_unknown_top_level_field(self):
        document = self._document()
        document["extra"] = 1
        with pytest.raises(SchemaError, match="unknown fields"):
            document_to_annotation(document)

    def test_missing_required_field(self):
        document = self._document()
        del document["duration"]
        with pytest.raises(SchemaError, match=r"\$\.duration"):
            document_to_annotation(document)

    def test_relation_with_unknown_id_addressed(self):
        document = self._document()
        document["relations"][0]["subject_id"] = 999
        with pytest.raises(SchemaError, match=r"relations\[0\]\.subject_id"):
            document_to_annotation(document)

    def test_corrupt_rle_addressed(self):
        document = self._document()
        document["objects"][1]["mask_rle"][0] = [3]
        with pytest.raises(SchemaError, match=r"objects\[1\]\.mask_rle"):
            document_to_annotation(document)

    def test_frame_count_mismatch_rejected(self):
        document = self._document()
        document["objects"][0]["mask_rle"].pop()
        with pytest.raises(SchemaError, match="frames"):
            document_to_annotation(document)

    def test_bad_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError, match="invalid JSON"):
            load_annotation(path)

    def test_wrong_schema_version(self):
        document = self._document()
        document["schema"] = 9
        with pytest.raises(SchemaError, match="unsupported version"):
            document_to_annotation(document)


class TestAnnotationDir:
    def test_loads_by_video_id(self, tmp_path):
        videos = _synth_annotations(videos=3)
        for video in videos:
            save_annotation(tmp_path / f"{video.gold.video_id}.json", video.gold)
        loaded = load_annotation_dir(tmp_path)
        assert sorted(loaded) == [v.gold.video_id for v in videos]

    def test_duplicate_video_id_rejected(self, tmp_path):
        video = _synth_annotations(videos=1)[0]
        save_annotation(tmp_path / "one.json", video.gold)
        save_annotation(tmp_path / "two.json", video.gold)
        with pytest.raises(SchemaError, match="duplicate video id"):
            load_annotation_dir(tmp_path)


class TestFrames:
    def _sequence(self, frames=3, width=6, height=4):
        rng = np.random.default_rng(0)
        return RGBDSequence(
            video_id="clip",
            rgb_frames=tuple(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
                             for _ in range(frames)),
            depth_frames=tuple(rng.integers(0, 5000, size=(height, width), dtype=np.uint16)
                               for _ in range(frames)),
            width=width, height=height, duration=2.0,
        )

    def test_round_trip(self, tmp_path):
        seq = self._sequence()
        save_frames(tmp_path / "clip", seq)
        loaded = load_frames(tmp_path / "clip", duration=2.0)
        assert loaded.frames == seq.frames
        for t in range(seq.frames):
            assert np.array_equal(loaded.rgb_frames[t], seq.rgb_frames[t])
            assert np.array_equal(loaded.depth_frames[t], seq.depth_frames[t])

    def test_constant_depth_reads_back_in_millimeters(self, tmp_path):
        seq = RGBDSequence(
            video_id="flat",
            rgb_frames=(np.zeros((2, 2, 3), dtype=np.uint8),),
            depth_frames=(np.full((2, 2), 1000, dtype=np.uint16),),
            width=2, height=2, duration=1.0,
        )
        save_frames(tmp_path / "flat", seq)
        loaded = load_frames(tmp_path / "flat")
        assert np.all(loaded.depth_frames[0] == 1000)

    def test_frame_count_mismatch_rejected(self, tmp_path):
        seq = self._sequence()
        save_frames(tmp_path / "clip", seq)
        (tmp_path / "clip" / "depth_00002.png").unlink()
        with pytest.raises(SchemaError, match="depth frames"):
            load_frames(tmp_path / "clip")


class TestDatasetStats:
    def test_counts_match_engineering(self):
        object_vocab = tuple(f"cat{i}" for i in range(35))
        predicate_vocab = tuple(f"rel{i}" for i in range(43))
        videos = _synth_annotations(
            seed=1, videos=60, height=8, min_objects=4, max_objects=6,
            relations_min=4, relations_max=8,
            object_vocab=object_vocab, predicate_vocab=predicate_vocab)
        stats = dataset_stats([v.gold for v in videos])
        assert stats.num_object_categories == 35
        assert stats.num_predicates == 43
        assert stats.videos == 60

    def test_empty_corpus(self):
        stats = dataset_stats([])
        assert stats.videos == 0
        assert stats.relations == 0
        assert stats.num_object_categories == 0

    def test_counts_equal_manual_tally(self):
        videos = _synth_annotations(seed=2, videos=5)
        stats = dataset_stats([v.gold for v in videos])
        manual_relations = sum(len(v.gold.scene.relations) for v in videos)
        manual_objects = sum(len(v.gold.scene.objects) for v in videos)
        assert stats.relations == manual_relations
        assert stats.object_instances == manual_objects
        manual_freq: dict = {}
        for v in videos:
            for rel in v.gold.scene.relations:
                manual_freq[rel.predicate] = manual_freq.get(rel.predicate, 0) + 1
        assert stats.predicate_freq == manual_freq
