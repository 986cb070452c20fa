"""
QA Filter — answer-length and article-id-list filtering for Task-2 records
===========================================================================

Drops records whose answer is longer than ``max_answer_words`` whitespace
words, and records whose answer is only a list of article references such
as "Điều 123, Điều 168". Anything the pattern does not clearly match is kept.
"""

import logging
import re
import unicodedata
from typing import List, Sequence, Tuple

from data.corpus_loader import Question
from data.pair_generator import split_question_ids

logger = logging.getLogger(__name__)

_ARTICLE_REF = r"điều\s+\d+[a-zđ]?"
ARTICLE_LIST_PATTERN = re.compile(
    rf"^\s*{_ARTICLE_REF}(?:\s*[,;]\s*{_ARTICLE_REF})*\s*\.?\s*$",
    re.IGNORECASE,
)


def is_article_id_list(answer: str) -> bool:
    return bool(ARTICLE_LIST_PATTERN.match(unicodedata.normalize("NFC", answer)))


def filter_qa(records: Sequence[Question], max_answer_words: int = 50) -> List[Question]:
    """Keep records with a short free-text answer, preserving input order."""
    kept: List[Question] = []
    no_answer = too_long = id_list = 0
    for record in records:
        if record.answer is None or not record.answer.strip():
            no_answer += 1
            continue
        if len(record.answer.split()) > max_answer_words:
            too_long += 1
            continue
        if is_article_id_list(record.answer):
            id_list += 1
            continue
        kept.append(record)

    logger.info(
        f"QA filter: kept {len(kept)}/{len(records)} "
        f"(no answer={no_answer}, >{max_answer_words} words={too_long}, article-id list={id_list})"
    )
    return kept


def split_qa(records: Sequence[Question], fraction: float = 0.15, seed: int = 42) -> Tuple[List[Question], List[Question]]:
    """Question-level (train, dev) split of QA records, input order kept on each side."""
    _, dev_ids = split_question_ids((r.question_id for r in records), fraction, seed)
    dev_set = set(dev_ids)
    return (
        [r for r in records if r.question_id not in dev_set],
        [r for r in records if r.question_id in dev_set],
    )
