"""
Pair Generator — question/passage training pairs with BM25 hard negatives
==========================================================================

For each question:
    1. skip it entirely if its token count exceeds ``max_question_tokens``
    2. positives = every gold article (retrieved or not), label 1
    3. negatives = BM25 top-k articles that are not gold, label 0
    4. each article is represented by its best-matching passage

Dev splits are by question: all pairs of one question land on one side.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import train_test_split

from core.bm25_index import Bm25Index
from core.exceptions import DanglingReferenceError, DataLoadError, SplitError
from core.segmenter import SegmentationConfig, representative_passage, segment
from core.text_normalizer import TextPipeline, TokenSeq
from data.corpus_loader import Article, ArticleKey, Question

logger = logging.getLogger(__name__)

PAIR_FIELDS = ("question_id", "law_id", "article_id", "passage_index", "passage_text", "label")


@dataclass(frozen=True)
class TrainingPair:
    question_id: str
    law_id: str
    article_id: str
    passage_index: int
    passage_text: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if not self.passage_text:
            raise ValueError("passage_text must be nonempty")


@dataclass
class PairSource:
    """One dataset with its own corpus, index and retrieval depth."""
    name: str
    questions: Sequence[Question]
    corpus: Sequence[Article]
    index: Bm25Index
    k: int
    article_tokens: Optional[Mapping[ArticleKey, TokenSeq]] = field(default=None, repr=False)


# ================================================================
# Generation
# ================================================================


def tokenize_corpus(
    corpus: Sequence[Article],
    pipeline: TextPipeline,
    workers: int = 1,
) -> Dict[ArticleKey, TokenSeq]:
    """Run every article through the text pipeline, keyed by ``(law_id, article_id)``."""
    if workers == 1:
        seqs = [pipeline.process(a.text) for a in corpus]
    else:
        seqs = Parallel(n_jobs=workers, prefer="threads")(
            delayed(pipeline.process)(a.text) for a in corpus
        )
    return {a.key: seq for a, seq in zip(corpus, seqs)}


def _pairs_for_question(
    question: Question,
    index: Bm25Index,
    article_tokens: Mapping[ArticleKey, TokenSeq],
    k: int,
    seg: SegmentationConfig,
    max_question_tokens: Optional[int],
    pipeline: TextPipeline,
) -> List[TrainingPair]:
    q_tokens = pipeline.process(question.text)
    if max_question_tokens is not None and len(q_tokens) > max_question_tokens:
        logger.debug(f"Skipping {question.question_id}: {len(q_tokens)} tokens > {max_question_tokens}")
        return []

    gold = question.relevant
    hits = index.top_k(q_tokens, k)
    labelled = [(key, 1) for key in sorted(gold)]
    labelled += [(hit.doc_id, 0) for hit in hits if hit.doc_id not in gold]

    pairs: List[TrainingPair] = []
    for key, label in labelled:
        tokens = article_tokens.get(key)
        if tokens is None:
            raise DanglingReferenceError(
                f"{question.question_id} cites {key} which is not in the corpus",
                offenders=[(question.question_id, key[0], key[1])],
            )
        passages = segment(tokens, seg, article_id=key)
        if not passages:
            if label == 1:
                raise DataLoadError(
                    f"{question.question_id} cites {key}, which has no tokens after preprocessing",
                    field="text",
                )
            logger.debug(f"Negative {key} has no tokens after preprocessing, no pair emitted")
            continue
        best = representative_passage(q_tokens, passages, index.params)
        pairs.append(TrainingPair(
            question_id=question.question_id,
            law_id=key[0],
            article_id=key[1],
            passage_index=best.passage_index,
            passage_text=best.surface_text,
            label=label,
        ))
    return pairs


def generate_pairs(
    questions: Sequence[Question],
    corpus: Sequence[Article],
    index: Bm25Index,
    k: int,
    seg: SegmentationConfig = SegmentationConfig(),
    max_question_tokens: Optional[int] = 128,
    pipeline: Optional[TextPipeline] = None,
    workers: int = 1,
    article_tokens: Optional[Mapping[ArticleKey, TokenSeq]] = None,
) -> List[TrainingPair]:
    """
    Labelled pairs for every question, merged in question_id order.

    Args:
        index: article-level index over ``corpus``
        k: retrieval depth for negatives
        article_tokens: pre-tokenized corpus, computed from ``pipeline`` when omitted
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pipeline = pipeline or TextPipeline()
    if article_tokens is None:
        article_tokens = tokenize_corpus(corpus, pipeline, workers)

    ordered = sorted(questions, key=lambda q: q.question_id)
    args = (index, article_tokens, k, seg, max_question_tokens, pipeline)
    if workers == 1:
        groups = [_pairs_for_question(q, *args) for q in ordered]
    else:
        groups = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_pairs_for_question)(q, *args) for q in ordered
        )

    pairs = [p for group in groups for p in group]
    stats = pair_stats(pairs)
    skipped = sum(1 for g in groups if not g)
    logger.info(
        f"Generated {stats['pairs']} pairs ({stats['positives']} pos / {stats['negatives']} neg) "
        f"for {stats['questions']} questions, k={k}, {skipped} question(s) contributed nothing"
    )
    return pairs


def generate_pairs_multi(
    sources: Sequence[PairSource],
    seg: SegmentationConfig = SegmentationConfig(),
    max_question_tokens: Optional[int] = 128,
    pipeline: Optional[TextPipeline] = None,
    workers: int = 1,
) -> Dict[str, List[TrainingPair]]:
    """Pairs per source, each with its own k (e.g. 150 for official data, 20 for Zalo)."""
    out: Dict[str, List[TrainingPair]] = {}
    for src in sources:
        logger.info(f"[{src.name}] generating pairs with k={src.k}")
        out[src.name] = generate_pairs(
            src.questions, src.corpus, src.index, src.k, seg,
            max_question_tokens, pipeline, workers, src.article_tokens,
        )
    return out


def pair_stats(pairs: Iterable[TrainingPair]) -> Dict[str, int]:
    pairs = list(pairs)
    positives = sum(p.label for p in pairs)
    return {
        "pairs": len(pairs),
        "positives": positives,
        "negatives": len(pairs) - positives,
        "questions": len({p.question_id for p in pairs}),
    }


# ================================================================
# Dev split
# ================================================================


def split_question_ids(
    question_ids: Iterable[str],
    fraction: float,
    seed: int,
) -> Tuple[List[str], List[str]]:
    """
    Seeded question-level split; the dev side gets round(fraction · n) ids
    (half rounds up), kept within [1, n-1].
    """
    if not (0.0 < fraction < 1.0):
        raise SplitError(f"fraction must be in (0, 1), got {fraction}")
    ids = sorted(set(question_ids))
    n = len(ids)
    if n < 2:
        raise SplitError(f"Need at least 2 questions to split, got {n}")

    n_dev = int(math.floor(fraction * n + 0.5))
    if not 1 <= n_dev <= n - 1:
        clamped = min(max(n_dev, 1), n - 1)
        logger.warning(f"Dev size {n_dev} of {n} questions clamped to {clamped}")
        n_dev = clamped

    train_ids, dev_ids = train_test_split(ids, test_size=n_dev, random_state=seed, shuffle=True)
    return sorted(train_ids), sorted(dev_ids)


def split_dev(
    pairs: Sequence[TrainingPair],
    fraction: float = 0.2,
    seed: int = 42,
    extra_train: Iterable[TrainingPair] = (),
    shuffle: bool = False,
) -> Tuple[List[TrainingPair], List[TrainingPair]]:
    """
    Split pairs into (train, dev) by question_id.

    ``extra_train`` pairs (other sources) always go to train. With ``shuffle``
    the train side is permuted with the same seed.
    """
    _, dev_ids = split_question_ids((p.question_id for p in pairs), fraction, seed)
    dev_set = set(dev_ids)
    dev = [p for p in pairs if p.question_id in dev_set]
    train = [p for p in pairs if p.question_id not in dev_set]
    train.extend(extra_train)
    if shuffle:
        rng = np.random.default_rng(seed)
        train = [train[i] for i in rng.permutation(len(train))]
    logger.info(
        f"Split: {len(train)} train pairs / {len(dev)} dev pairs "
        f"({len(dev_set)} dev questions)"
    )
    return train, dev


# ================================================================
# JSONL
# ================================================================


def write_pairs_jsonl(path: str, pairs: Iterable[TrainingPair]) -> int:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(asdict(pair), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_pairs_jsonl(path: str) -> List[TrainingPair]:
    pairs: List[TrainingPair] = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    pairs.append(TrainingPair(**{k: record[k] for k in PAIR_FIELDS}))
                except KeyError as exc:
                    raise DataLoadError(f"{path}: line {lineno + 1} missing {exc}", lineno, str(exc)) from exc
                except (json.JSONDecodeError, TypeError, ValueError) as exc:
                    raise DataLoadError(f"{path}: line {lineno + 1}: {exc}", lineno) from exc
    except OSError as exc:
        raise DataLoadError(f"Cannot read {path}: {exc}") from exc
    return pairs
