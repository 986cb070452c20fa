"""Tests for QA answer filtering."""

import pytest

from data.corpus_loader import Question
from data.qa_filter import filter_qa, is_article_id_list, split_qa


def _record(qid, answer):
    return Question(qid, f"câu hỏi {qid}", frozenset(), answer)


class TestArticleIdList:
    """Article-reference-list detection."""

    @pytest.mark.parametrize("answer", [
        "Điều 123, Điều 168",
        "Điều 5",
        "điều 12; Điều 13.",
        "Điều 2a, Điều 7",
    ])
    def test_lists_detected(self, answer):
        assert is_article_id_list(answer)

    @pytest.mark.parametrize("answer", [
        "Điều 5 quy định về thời hiệu",
        "có",
        "Theo Điều 123 thì không",
        "",
    ])
    def test_free_text_kept(self, answer):
        assert not is_article_id_list(answer)


class TestFilterQa:
    """Answer-length and pattern filtering."""

    def test_examples(self):
        records = [
            _record("q1", " ".join(["từ"] * 51)),
            _record("q2", "Điều 123, Điều 168"),
            _record("q3", "có"),
            _record("q4", " ".join(["từ"] * 50)),
        ]
        assert [r.question_id for r in filter_qa(records, 50)] == ["q3", "q4"]

    def test_missing_answer_dropped(self):
        records = [_record("q1", None), _record("q2", "   "), _record("q3", "không")]
        assert [r.question_id for r in filter_qa(records)] == ["q3"]

    def test_custom_limit(self):
        records = [_record("q1", "một hai ba")]
        assert filter_qa(records, max_answer_words=2) == []


class TestSplitQa:
    """Question-level QA split."""

    def test_partition(self):
        records = [_record(f"q{i:02d}", "có") for i in range(20)]
        train, dev = split_qa(records, 0.15, seed=1)
        assert len(dev) == 3
        assert {r.question_id for r in train} | {r.question_id for r in dev} == {r.question_id for r in records}
        assert not {r.question_id for r in train} & {r.question_id for r in dev}
