import json

import numpy as np
import pytest

from pawctl.classifier import ClassifierConfig
from pawctl.corpus import (
    HAND_LABELS,
    HEAD_LABELS,
    evaluate_corpus,
    generate_corpus,
    hand_clip_frames,
    head_clip_frames,
    perturb_frame,
    predict_clip,
)
from pawctl.landmarks import iter_corpus, parse_frame, read_frames


class TestGeneration:
    def test_checked_in_corpus_layout(self, corpus_dir):
        labels = {label for label, _ in iter_corpus(corpus_dir)}
        assert labels == set(HAND_LABELS) | set(HEAD_LABELS)
        counts = {}
        for label, _ in iter_corpus(corpus_dir):
            counts[label] = counts.get(label, 0) + 1
        for label in HAND_LABELS:
            assert counts[label] >= 25
        for label in HEAD_LABELS:
            assert counts[label] >= 5

    def test_clips_schema_valid_and_ordered(self, corpus_dir):
        # read_frames enforces the schema and strict timestamp order.
        seen = 0
        for _, clip in iter_corpus(corpus_dir):
            frames = list(read_frames(clip))
            assert len(frames) > 10
            seen += 1
        assert seen >= 135

    def test_generation_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_corpus(a, clips_per_hand=2, clips_per_head=1, seed=3)
        generate_corpus(b, clips_per_hand=2, clips_per_head=1, seed=3)
        for pa, pb in zip(sorted(a.rglob("*.ndjson")), sorted(b.rglob("*.ndjson"))):
            assert pa.read_text() == pb.read_text()


class TestPrediction:
    def test_hand_clip_predicted(self):
        rng = np.random.default_rng(5)
        frames = [parse_frame(json.dumps(f)) for f in hand_clip_frames("thumb_up", rng)]
        label, channel, _ = predict_clip(frames, ClassifierConfig())
        assert label == "thumb_up" and channel == "hand"

    def test_head_clip_predicted(self):
        rng = np.random.default_rng(6)
        frames = [parse_frame(json.dumps(f)) for f in head_clip_frames("shake", rng)]
        label, channel, _ = predict_clip(frames, ClassifierConfig())
        assert label == "shake" and channel == "head"

    def test_perturbation_preserves_timestamps(self):
        rng = np.random.default_rng(8)
        frames = [parse_frame(json.dumps(f)) for f in hand_clip_frames("fist", rng)]
        noisy = [perturb_frame(f, rng, 0.01) for f in frames]
        assert [f.t_ms for f in frames] == [f.t_ms for f in noisy]


class TestAccuracy:
    def test_clean_accuracy(self, corpus_dir):
        report = evaluate_corpus(corpus_dir)
        assert report["hand"]["accuracy"] >= 0.96
        assert report["head"]["correct"] == report["head"]["total"] == 10

    def test_noisy_accuracy(self, corpus_dir):
        report = evaluate_corpus(corpus_dir, noise_sigma=0.01, seed=123)
        assert report["hand"]["accuracy"] >= 0.84
        assert report["head"]["correct"] == report["head"]["total"] == 10

    def test_report_shape(self, corpus_dir):
        report = evaluate_corpus(corpus_dir)
        assert set(report["confusion"]) == set(HAND_LABELS) | set(HEAD_LABELS)
        assert report["latency_ms_per_frame"] > 0.0
