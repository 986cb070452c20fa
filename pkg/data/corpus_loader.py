"""
Corpus Loader — ALQAC-style corpus and question files
======================================================

Corpus file (JSON):
    [
        {
            "id": "05/2022/QH15",
            "articles": [
                {"id": "1", "text": "..."},
                ...
            ]
        },
        ...
    ]

Questions file (JSON):
    [
        {
            "question_id": "q-001",
            "text": "...",
            "relevant_articles": [{"law_id": "05/2022/QH15", "article_id": "1"}],
            "answer": "..."            # optional, Task-2 records
        },
        ...
    ]

Articles are keyed by ``(law_id, article_id)``; that tuple is also the doc id
used by the article-level BM25 index.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from core.exceptions import DanglingReferenceError, DataLoadError
from core.text_normalizer import decode_text

logger = logging.getLogger(__name__)

ArticleKey = Tuple[str, str]


@dataclass(frozen=True)
class Article:
    """One article of one law"""
    law_id: str
    article_id: str
    text: str

    @property
    def key(self) -> ArticleKey:
        return (self.law_id, self.article_id)


@dataclass(frozen=True)
class Question:
    """A query with its gold article links; ``answer`` is set on Task-2 records"""
    question_id: str
    text: str
    relevant: FrozenSet[ArticleKey] = field(default_factory=frozenset)
    answer: Optional[str] = None

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "question_id": self.question_id,
            "text": self.text,
            "relevant_articles": [
                {"law_id": law_id, "article_id": article_id}
                for law_id, article_id in sorted(self.relevant)
            ],
        }
        if self.answer is not None:
            record["answer"] = self.answer
        return record


# ================================================================
# Helpers
# ================================================================


def read_json(path: str) -> Any:
    if not os.path.exists(path):
        raise DataLoadError(f"File not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = f.read()
        return json.loads(decode_text(raw))
    except json.JSONDecodeError as exc:
        raise DataLoadError(f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise DataLoadError(f"Cannot read {path}: {exc}") from exc


def _require_str(record: Any, key: str, index: int, what: str) -> str:
    if not isinstance(record, dict):
        raise DataLoadError(f"{what} #{index} is not an object", record_index=index, field="")
    value = record.get(key)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = str(value)
    if not isinstance(value, str) or (key != "text" and not value.strip()):
        raise DataLoadError(
            f"{what} #{index}: field '{key}' missing or not a string",
            record_index=index, field=key,
        )
    return value


# ================================================================
# Loading
# ================================================================


def load_corpus(path: str) -> List[Article]:
    """Load every article; duplicate ``(law_id, article_id)`` keys are an error."""
    laws = read_json(path)
    if not isinstance(laws, list):
        raise DataLoadError(f"{path}: top level must be a JSON array of laws")

    articles: List[Article] = []
    seen = set()
    for law_index, law in enumerate(laws):
        law_id = _require_str(law, "id", law_index, "law")
        entries = law.get("articles")
        if not isinstance(entries, list):
            raise DataLoadError(
                f"law #{law_index}: field 'articles' must be an array",
                record_index=law_index, field="articles",
            )
        for entry_index, entry in enumerate(entries):
            where = f"law #{law_index} article"
            article_id = _require_str(entry, "id", entry_index, where)
            text = _require_str(entry, "text", entry_index, where)
            key = (law_id, article_id)
            if key in seen:
                raise DataLoadError(
                    f"{where} #{entry_index}: duplicate article {key}",
                    record_index=entry_index, field="id",
                )
            seen.add(key)
            articles.append(Article(law_id, article_id, text))

    logger.info(f"Loaded {len(articles)} articles from {len(laws)} laws ({path})")
    return articles


def parse_questions(records: Any, source: str = "<memory>") -> List[Question]:
    if not isinstance(records, list):
        raise DataLoadError(f"{source}: top level must be a JSON array of questions")

    questions: List[Question] = []
    seen = set()
    for index, record in enumerate(records):
        qid = _require_str(record, "question_id", index, "question")
        text = _require_str(record, "text", index, "question")
        if qid in seen:
            raise DataLoadError(f"question #{index}: duplicate question_id {qid}", index, "question_id")
        seen.add(qid)

        links = record.get("relevant_articles", [])
        if not isinstance(links, list):
            raise DataLoadError(f"question #{index}: 'relevant_articles' must be an array", index, "relevant_articles")
        relevant = set()
        for link in links:
            relevant.add((
                _require_str(link, "law_id", index, "question relevant_articles of"),
                _require_str(link, "article_id", index, "question relevant_articles of"),
            ))

        answer = record.get("answer")
        if answer is not None and not isinstance(answer, str):
            raise DataLoadError(f"question #{index}: 'answer' must be a string", index, "answer")
        questions.append(Question(qid, text, frozenset(relevant), answer))
    return questions


def load_questions(path: str, corpus: Optional[Sequence[Article]] = None) -> List[Question]:
    """Load questions; when ``corpus`` is given, every gold link must resolve in it."""
    questions = parse_questions(read_json(path), source=path)
    if corpus is not None:
        check_references(questions, corpus)
    n_links = sum(len(q.relevant) for q in questions)
    logger.info(f"Loaded {len(questions)} questions with {n_links} gold links ({path})")
    return questions


def check_references(questions: Iterable[Question], corpus: Sequence[Article]) -> None:
    keys = {a.key for a in corpus}
    offenders = [
        (q.question_id, law_id, article_id)
        for q in questions
        for law_id, article_id in sorted(q.relevant)
        if (law_id, article_id) not in keys
    ]
    if offenders:
        listed = ", ".join(f"{qid}->{law}/{art}" for qid, law, art in offenders[:10])
        more = f" (+{len(offenders) - 10} more)" if len(offenders) > 10 else ""
        raise DanglingReferenceError(
            f"{len(offenders)} relevant article reference(s) not in corpus: {listed}{more}",
            offenders=offenders,
        )


# ================================================================
# Writing
# ================================================================


def write_json(path: str, payload: Any) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
        f.write("\n")


def write_questions(path: str, questions: Iterable[Question]) -> None:
    write_json(path, [q.to_record() for q in questions])


def write_corpus(path: str, articles: Iterable[Article]) -> None:
    laws: Dict[str, List[Dict[str, str]]] = {}
    for a in articles:
        laws.setdefault(a.law_id, []).append({"id": a.article_id, "text": a.text})
    write_json(path, [{"id": law_id, "articles": items} for law_id, items in laws.items()])
