"""Tests for corpus and question file loading."""

import json
import os

import pytest

from core.exceptions import DanglingReferenceError, DataLoadError, TextDecodeError
from data.corpus_loader import (
    Article,
    Question,
    check_references,
    load_corpus,
    load_questions,
    parse_questions,
    write_corpus,
    write_questions,
)


def _dump(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False)
    return path


@pytest.fixture
def corpus_payload():
    return [
        {"id": f"law{l}", "articles": [{"id": str(a), "text": f"Điều {a} của luật {l}"} for a in range(1, 4)]}
        for l in range(2)
    ]


class TestLoadCorpus:
    """Corpus ingestion."""

    def test_two_laws_three_articles(self, tmpdir_path, corpus_payload):
        articles = load_corpus(_dump(os.path.join(tmpdir_path, "c.json"), corpus_payload))
        assert len(articles) == 6
        assert articles[0] == Article("law0", "1", "Điều 1 của luật 0")
        assert articles[-1].key == ("law1", "3")

    def test_numeric_ids_become_strings(self, tmpdir_path):
        payload = [{"id": 2020, "articles": [{"id": 5, "text": "x"}]}]
        articles = load_corpus(_dump(os.path.join(tmpdir_path, "c.json"), payload))
        assert articles[0].key == ("2020", "5")

    def test_missing_field_names_record(self, tmpdir_path):
        payload = [{"id": "law0", "articles": [{"id": "1", "text": "a"}, {"id": "2"}]}]
        with pytest.raises(DataLoadError) as info:
            load_corpus(_dump(os.path.join(tmpdir_path, "c.json"), payload))
        assert info.value.record_index == 1
        assert info.value.field == "text"

    def test_articles_not_a_list(self, tmpdir_path):
        payload = [{"id": "law0", "articles": "nope"}]
        with pytest.raises(DataLoadError) as info:
            load_corpus(_dump(os.path.join(tmpdir_path, "c.json"), payload))
        assert info.value.field == "articles"

    def test_duplicate_article(self, tmpdir_path):
        payload = [{"id": "law0", "articles": [{"id": "1", "text": "a"}, {"id": "1", "text": "b"}]}]
        with pytest.raises(DataLoadError):
            load_corpus(_dump(os.path.join(tmpdir_path, "c.json"), payload))

    def test_invalid_json(self, tmpdir_path):
        path = os.path.join(tmpdir_path, "c.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write("[{")
        with pytest.raises(DataLoadError):
            load_corpus(path)

    def test_invalid_utf8(self, tmpdir_path):
        path = os.path.join(tmpdir_path, "c.json")
        with open(path, "wb") as f:
            f.write(b'[{"id": "\xff"}]')
        with pytest.raises(TextDecodeError) as info:
            load_corpus(path)
        assert info.value.byte_offset == 9

    def test_missing_file(self, tmpdir_path):
        with pytest.raises(DataLoadError):
            load_corpus(os.path.join(tmpdir_path, "missing.json"))


class TestLoadQuestions:
    """Question ingestion and reference checks."""

    def test_round_trip(self, tmpdir_path):
        questions = [
            Question("q1", "Câu hỏi một", frozenset({("law0", "1")}), answer="có"),
            Question("q2", "Câu hỏi hai", frozenset({("law0", "2"), ("law1", "1")})),
        ]
        path = os.path.join(tmpdir_path, "q.json")
        write_questions(path, questions)
        assert load_questions(path) == questions

    def test_empty_list(self, tmpdir_path):
        assert load_questions(_dump(os.path.join(tmpdir_path, "q.json"), [])) == []

    def test_dangling_reference(self, tmpdir_path, corpus_payload):
        corpus = load_corpus(_dump(os.path.join(tmpdir_path, "c.json"), corpus_payload))
        payload = [{
            "question_id": "q1",
            "text": "?",
            "relevant_articles": [{"law_id": "law9", "article_id": "1"}],
        }]
        with pytest.raises(DanglingReferenceError) as info:
            load_questions(_dump(os.path.join(tmpdir_path, "q.json"), payload), corpus)
        assert info.value.offenders == (("q1", "law9", "1"),)

    def test_duplicate_question_id(self):
        records = [{"question_id": "q1", "text": "a"}, {"question_id": "q1", "text": "b"}]
        with pytest.raises(DataLoadError) as info:
            parse_questions(records)
        assert info.value.record_index == 1

    def test_answer_must_be_string(self):
        with pytest.raises(DataLoadError) as info:
            parse_questions([{"question_id": "q1", "text": "a", "answer": 3}])
        assert info.value.field == "answer"

    def test_check_references_passes(self):
        corpus = [Article("l", "1", "x")]
        check_references([Question("q", "?", frozenset({("l", "1")}))], corpus)


class TestWriteCorpus:
    """Corpus writer."""

    def test_round_trip(self, tmpdir_path):
        articles = [Article("a", "1", "x"), Article("a", "2", "y"), Article("b", "1", "z")]
        path = os.path.join(tmpdir_path, "out", "corpus.json")
        write_corpus(path, articles)
        assert load_corpus(path) == articles
