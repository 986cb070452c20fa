"""Tests for precision/recall/F-beta evaluation and QA answer F1."""

import pytest

from core.exceptions import EvaluationError
from data.corpus_loader import Question
from ml.evaluation import (
    answer_f1,
    evaluate_answers,
    evaluate_run,
    f_beta,
    load_answers,
    prf,
)

A, B, C = ("L", "A"), ("L", "B"), ("L", "C")


@pytest.fixture
def gold():
    return [
        Question("q1", "?", frozenset({A})),
        Question("q2", "?", frozenset({A, B})),
    ]


class TestMetrics:
    """prf and f_beta."""

    @pytest.mark.parametrize("predicted, truth, expected", [
        ({A}, {A}, (1.0, 1.0)),
        ({A, B}, {A}, (0.5, 1.0)),
        ({A}, {A, B}, (1.0, 0.5)),
        ({C}, {A}, (0.0, 0.0)),
        (set(), {A}, (0.0, 0.0)),
        ({A}, set(), (0.0, 0.0)),
        (set(), set(), (1.0, 1.0)),
    ])
    def test_prf(self, predicted, truth, expected):
        assert prf(predicted, truth) == expected

    def test_f2_weights_recall(self):
        assert f_beta(0.5, 1.0) == pytest.approx(0.833333, abs=1e-6)
        assert f_beta(1.0, 0.5) == pytest.approx(0.555556, abs=1e-6)

    def test_f1(self):
        assert f_beta(0.5, 1.0, beta=1.0) == pytest.approx(2 / 3)

    def test_zero(self):
        assert f_beta(0.0, 0.0) == 0.0

    @pytest.mark.parametrize("beta", [0.0, -1.0])
    def test_invalid_beta(self, beta):
        with pytest.raises(EvaluationError):
            f_beta(1.0, 1.0, beta)


class TestEvaluateRun:
    """Macro averages over gold questions."""

    def test_gold_as_run(self, gold):
        report = evaluate_run({q.question_id: q.relevant for q in gold}, gold)
        assert report.macro["f2"] == 1.0
        assert report.n_empty_prediction == 0

    def test_one_perfect_one_empty(self, gold):
        report = evaluate_run({"q1": {A}, "q2": set()}, gold)
        assert report.macro["f2"] == pytest.approx(0.5)
        assert report.n_empty_prediction == 1

    def test_uncovered_question_counts_as_empty(self, gold):
        report = evaluate_run({"q1": {A}}, gold)
        assert report.macro["f2"] == pytest.approx(0.5)
        assert [m.question_id for m in report.per_question] == ["q1", "q2"]

    def test_empty_run(self, gold):
        assert evaluate_run({}, gold).macro["f2"] == 0.0

    def test_unknown_question(self, gold):
        with pytest.raises(EvaluationError):
            evaluate_run({"q9": {A}}, gold)

    def test_over_selection_costs_precision(self, gold):
        report = evaluate_run({"q1": {A, B}, "q2": {A, B}}, gold)
        assert report.macro["precision"] == pytest.approx(0.75)
        assert report.macro["recall"] == 1.0

    def test_report_outputs(self, gold):
        report = evaluate_run({"q1": {A}, "q2": {A}}, gold)
        table = report.to_table()
        assert "MACRO" in table
        assert "q2" in table
        assert report.to_dict()["n_questions"] == 2
        assert list(report.to_frame()["question_id"]) == ["q1", "q2"]


class TestAnswers:
    """Token F1 between answer strings."""

    def test_identical(self):
        assert answer_f1("Có, theo quy định.", "có theo quy định") == 1.0

    def test_partial(self):
        assert answer_f1("không được phép", "không") == pytest.approx(0.5)

    def test_disjoint(self):
        assert answer_f1("có", "không") == 0.0

    def test_both_empty(self):
        assert answer_f1("", "") == 1.0

    def test_evaluate_answers(self):
        gold = [
            Question("q1", "?", answer="có"),
            Question("q2", "?", answer="không"),
            Question("q3", "?"),
        ]
        report = evaluate_answers({"q1": "có"}, gold)
        assert report["n_questions"] == 2
        assert report["macro_f1"] == pytest.approx(0.5)

    def test_unknown_prediction(self):
        with pytest.raises(EvaluationError):
            evaluate_answers({"q9": "có"}, [Question("q1", "?", answer="có")])

    def test_load_answers(self):
        records = [{"question_id": "q1", "answer": "có"}, {"question_id": "q2", "answer": None}]
        assert load_answers(records) == {"q1": "có", "q2": ""}

    def test_load_answers_bad_records(self):
        with pytest.raises(EvaluationError):
            load_answers({"q1": "có"})
        with pytest.raises(EvaluationError):
            load_answers([{"answer": "có"}])
