"""Tests for the rerank pipeline, voting and submission files."""

import json
import os

import numpy as np
import pytest

from core.bm25_index import build_index
from core.exceptions import ScorerProtocolError, VoteError
from core.rerank_pipeline import (
    ArticleProbability,
    PipelineConfig,
    RerankPipeline,
    RunResult,
    SelectionPolicy,
    aggregate_article,
    load_submission,
    meta_path,
    read_run,
    run_pipeline,
    select_relevant,
    vote,
    write_submission,
)
from core.segmenter import SegmentationConfig
from core.text_normalizer import CompoundTokenizer, NormalizationConfig, TextPipeline
from data.corpus_loader import Article, Question, write_questions
from data.pair_generator import tokenize_corpus
from ml.scorers import ExternalScorer, ScoreResponse


def _index(corpus, pipeline=None):
    return build_index(tokenize_corpus(corpus, pipeline or TextPipeline()))


def _run(probs, policy=SelectionPolicy()):
    """RunResult from ``{qid: {(law, art): p}}``."""
    predictions = {
        qid: [
            ArticleProbability(k[0], k[1], p)
            for k, p in sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
        for qid, table in probs.items()
    }
    return RunResult(predictions, policy)


class RecordingScorer:
    """Keeps every request it is sent and answers 0.5."""

    name = "recording"

    def __init__(self):
        self.requests = []

    def score_batch(self, requests):
        self.requests.extend(requests)
        return [ScoreResponse(r.pair_id, 0.5) for r in requests]

    def close(self):
        pass


class TestAggregationAndSelection:
    """Article probability and relevant-set selection."""

    def test_max_over_passages(self):
        assert aggregate_article([0.2, 0.9, 0.4]) == 0.9
        assert aggregate_article([0.3]) == 0.3

    def test_no_passages(self):
        with pytest.raises(ValueError):
            aggregate_article([])

    def test_top1(self):
        probs = {("L", "1"): 0.9, ("L", "2"): 0.7, ("L", "3"): 0.1}
        assert select_relevant(probs, SelectionPolicy("top1")) == {("L", "1")}

    def test_top1_tie_goes_to_smallest_key(self):
        probs = {("L", "2"): 0.5, ("L", "1"): 0.5}
        assert select_relevant(probs, SelectionPolicy("top1")) == {("L", "1")}

    def test_threshold(self):
        probs = {("L", "1"): 0.9, ("L", "2"): 0.7, ("L", "3"): 0.1}
        assert select_relevant(probs, SelectionPolicy("threshold", 0.6)) == {("L", "1"), ("L", "2")}

    def test_threshold_falls_back_to_argmax(self):
        probs = {("L", "1"): 0.3, ("L", "2"): 0.2}
        assert select_relevant(probs, SelectionPolicy("threshold", 0.5)) == {("L", "1")}

    def test_no_candidates(self):
        assert select_relevant({}, SelectionPolicy()) == frozenset()

    @pytest.mark.parametrize("kwargs", [{"kind": "top3"}, {"tau": 1.5}, {"tau": -0.1}])
    def test_invalid_policy(self, kwargs):
        with pytest.raises(ValueError):
            SelectionPolicy(**kwargs)

    @pytest.mark.parametrize("kwargs", [{"k_retrieve": 0}, {"retrieval_unit": "sentence"}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)


class TestPipeline:
    """End-to-end runs with the builtin scorer."""

    @pytest.mark.parametrize("unit", ["article", "passage"])
    def test_verbatim_questions_find_gold(self, legal_dataset, unit):
        corpus, questions = legal_dataset(n_questions=20)
        cfg = PipelineConfig(k_retrieve=5, retrieval_unit=unit)
        run = run_pipeline(questions, corpus, _index(corpus), cfg)
        assert run.question_ids == sorted(q.question_id for q in questions)
        for q in questions:
            assert run.selected[q.question_id] == q.relevant

    def test_all_candidates_when_k_exceeds_corpus(self, legal_dataset):
        corpus, questions = legal_dataset(n_questions=3)
        run = run_pipeline(questions, corpus, _index(corpus), PipelineConfig(k_retrieve=150))
        assert all(len(run.predictions[q.question_id]) == 6 for q in questions)

    def test_probabilities_ranked(self, legal_dataset):
        corpus, questions = legal_dataset(n_questions=5)
        run = run_pipeline(questions, corpus, _index(corpus), PipelineConfig(k_retrieve=6))
        for ranked in run.predictions.values():
            probs = [ap.probability for ap in ranked]
            assert probs == sorted(probs, reverse=True)
            assert all(0.0 <= p <= 1.0 for p in probs)

    def test_no_lexical_overlap_gives_empty_prediction(self, legal_dataset):
        corpus, _ = legal_dataset()
        run = run_pipeline([Question("qx", "zzz yyy")], corpus, _index(corpus))
        assert run.predictions["qx"] == []
        assert run.selected["qx"] == frozenset()

    def test_deterministic_submission(self, tmpdir_path, legal_dataset):
        corpus, questions = legal_dataset()
        index = _index(corpus)
        cfg = PipelineConfig(k_retrieve=4, seg=SegmentationConfig(16, 8))
        first = os.path.join(tmpdir_path, "a.json")
        second = os.path.join(tmpdir_path, "b.json")
        write_submission(first, run_pipeline(questions, corpus, index, cfg))
        write_submission(second, run_pipeline(list(reversed(questions)), corpus, index, cfg))
        for x, y in ((first, second), (meta_path(first), meta_path(second))):
            with open(x, "rb") as fx, open(y, "rb") as fy:
                assert fx.read() == fy.read()

    def test_parallel_matches_serial(self, legal_dataset):
        corpus, questions = legal_dataset()
        index = _index(corpus)
        serial = run_pipeline(questions, corpus, index, PipelineConfig(k_retrieve=4))
        parallel = run_pipeline(questions, corpus, index, PipelineConfig(k_retrieve=4, workers=2))
        assert serial.predictions == parallel.predictions

    def test_provenance(self, legal_dataset):
        corpus, questions = legal_dataset(n_questions=2)
        run = run_pipeline(questions, corpus, _index(corpus), PipelineConfig(k_retrieve=3))
        assert run.provenance["scorer"] == "builtin-lexical"
        assert run.provenance["k_retrieve"] == 3

    def test_scorer_sees_readable_passages(self):
        pipeline = TextPipeline(
            NormalizationConfig(remove_stopwords=True, stopword_list=frozenset({"của", "và"})),
            CompoundTokenizer(["tòa án", "viện kiểm sát"]),
        )
        corpus = [Article("L", "A", "Quyền của Tòa án và Viện kiểm sát")]
        scorer = RecordingScorer()
        pipeline_run = RerankPipeline(
            corpus, _index(corpus, pipeline), scorer, PipelineConfig(k_retrieve=1), pipeline=pipeline
        )
        pipeline_run.run([Question("q1", "Quyền của Tòa án?")])
        [request] = scorer.requests
        assert request.question_text == "Quyền của Tòa án?"
        assert request.passage_text == "quyền của tòa án và viện kiểm sát"


class TestExternalPipeline:
    """Pipeline driving a child-process scorer."""

    @pytest.fixture
    def two_articles(self):
        corpus = [Article("L", "A", "alpha beta"), Article("L", "B", "alpha gamma delta")]
        return corpus, _index(corpus), [Question("q1", "alpha beta")]

    def test_scorer_overrides_lexical_order(self, tmpdir_path, two_articles, constant_scorer_command):
        corpus, index, questions = two_articles
        table = os.path.join(tmpdir_path, "table.json")
        with open(table, "w", encoding="utf-8") as f:
            json.dump({"q1#0": 0.2, "q1#1": 0.9}, f)
        with ExternalScorer(constant_scorer_command("--table", table), timeout=30) as scorer:
            run = RerankPipeline(corpus, index, scorer, PipelineConfig(k_retrieve=2)).run(questions)
        assert run.selected["q1"] == {("L", "B")}
        assert run.probabilities("q1") == {("L", "B"): 0.9, ("L", "A"): 0.2}

    def test_malformed_response_aborts(self, two_articles, constant_scorer_command):
        corpus, index, questions = two_articles
        with ExternalScorer(constant_scorer_command("--malformed-at", "1"), timeout=30) as scorer:
            pipeline = RerankPipeline(corpus, index, scorer, PipelineConfig(k_retrieve=2))
            with pytest.raises(ScorerProtocolError) as info:
                pipeline.run(questions)
        assert info.value.pair_id == "q1#1"


class TestVote:
    """Score-level voting over runs."""

    def test_single_run_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            probs = {
                f"q{q}": {("L", str(a)): float(rng.random()) for a in range(int(rng.integers(0, 6)))}
                for q in range(int(rng.integers(1, 6)))
            }
            run = _run(probs)
            voted = vote([run])
            assert voted.selected == run.selected
            for qid in probs:
                assert voted.probabilities(qid) == run.probabilities(qid)

    @pytest.mark.parametrize("weight", [0.0, 2.5])
    def test_single_run_ignores_weight(self, weight):
        run = _run({"q1": {("L", "A"): 0.8, ("L", "B"): 0.3}, "q2": {}})
        voted = vote([run], weights=[weight])
        assert voted.probabilities("q1") == run.probabilities("q1")
        assert voted.selected == run.selected

    def test_missing_article_counts_zero(self):
        a = _run({"q1": {("L", "A"): 1.0}})
        b = _run({"q1": {("L", "B"): 0.6}})
        voted = vote([a, b])
        assert voted.probabilities("q1") == {("L", "A"): 0.5, ("L", "B"): 0.3}
        assert voted.selected["q1"] == {("L", "A")}

    def test_weights(self):
        a = _run({"q1": {("L", "A"): 1.0}})
        b = _run({"q1": {("L", "B"): 0.6}})
        voted = vote([a, b], weights=[1.0, 3.0])
        assert voted.selected["q1"] == {("L", "B")}

    def test_policy_override(self):
        a = _run({"q1": {("L", "A"): 0.9, ("L", "B"): 0.8}})
        voted = vote([a], policy=SelectionPolicy("threshold", 0.7))
        assert voted.selected["q1"] == {("L", "A"), ("L", "B")}

    def test_mismatched_questions(self):
        with pytest.raises(VoteError):
            vote([_run({"q1": {}}), _run({"q2": {}})])

    @pytest.mark.parametrize("weights", [[1.0], [-1.0, 2.0], [0.0, 0.0]])
    def test_bad_weights(self, weights):
        with pytest.raises(VoteError):
            vote([_run({"q1": {}}), _run({"q1": {}})], weights=weights)

    def test_no_runs(self):
        with pytest.raises(VoteError):
            vote([])


class TestSubmission:
    """Submission file and metadata sidecar."""

    def test_round_trip(self, tmpdir_path):
        run = _run({"q1": {("L", "A"): 0.9, ("L", "B"): 0.2}, "q2": {}}, SelectionPolicy("threshold", 0.1))
        path = os.path.join(tmpdir_path, "submission.json")
        assert write_submission(path, run) == [path, meta_path(path)]
        loaded = read_run(path)
        assert loaded.policy == run.policy
        assert loaded.predictions == run.predictions
        assert load_submission(path) == {"q1": {("L", "A"), ("L", "B")}, "q2": frozenset()}

    def test_without_sidecar(self, tmpdir_path):
        run = _run({"q1": {("L", "A"): 0.9, ("L", "B"): 0.2}})
        path = os.path.join(tmpdir_path, "submission.json")
        write_submission(path, run)
        os.remove(meta_path(path))
        loaded = read_run(path)
        assert loaded.selected == {"q1": {("L", "A")}}
        assert loaded.probabilities("q1") == {("L", "A"): 1.0}

    def test_questions_file_reads_as_gold(self, tmpdir_path):
        questions = [Question("q1", "?", frozenset({("L", "1"), ("M", "2")})), Question("q2", "?")]
        path = os.path.join(tmpdir_path, "questions.json")
        write_questions(path, questions)
        assert load_submission(path) == {"q1": {("L", "1"), ("M", "2")}, "q2": frozenset()}
