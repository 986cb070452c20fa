"""
BM25 Index — inverted-index Okapi BM25 ranking
================================================

Used for candidate retrieval, hard-negative generation, representative
passage selection and the builtin lexical scorer.

    score(q, d) = Σ_{t∈q} idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·dl/avgdl))
    idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))

The +1 inside the log keeps idf non-negative for every df in [1, N].
Hit lists are sorted by score descending, ties by ascending doc_id; documents
scoring zero are never returned.

A built index is immutable: any number of threads may score against it.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Mapping, Sequence, Tuple, Union

import joblib
import numpy as np
from joblib import Parallel, delayed

from core.exceptions import IndexBuildError, IndexFormatError, UnknownDocumentError
from core.text_normalizer import TokenSeq

logger = logging.getLogger(__name__)

INDEX_FORMAT = "bm25-index"
INDEX_VERSION = 1

DocId = Hashable
Tokens = Union[TokenSeq, Sequence[str]]


@dataclass(frozen=True)
class Bm25Params:
    """BM25 free parameters."""
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if not (self.k1 > 0 and math.isfinite(self.k1)):
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class ScoredHit:
    """One ranked document."""
    doc_id: DocId
    score: float


def idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


class Bm25Index:
    """Inverted index: term → (doc positions, term frequencies), plus length statistics."""

    def __init__(
        self,
        doc_ids: Sequence[DocId],
        doc_len: np.ndarray,
        postings: Mapping[str, Tuple[np.ndarray, np.ndarray]],
        params: Bm25Params,
    ):
        self.doc_ids: Tuple[DocId, ...] = tuple(doc_ids)
        self.doc_len = np.asarray(doc_len, dtype=np.int64)
        self.postings: Dict[str, Tuple[np.ndarray, np.ndarray]] = dict(postings)
        self.params = params
        self.n_docs = len(self.doc_ids)
        self.avg_doc_len = float(self.doc_len.sum()) / self.n_docs if self.n_docs else 0.0
        self._position = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        self._idf = {t: idf(self.n_docs, len(p[0])) for t, p in self.postings.items()}

    # ================================================================
    # Build
    # ================================================================

    @classmethod
    def build(
        cls,
        docs: Union[Mapping[DocId, Tokens], Iterable[Tuple[DocId, Tokens]]],
        params: Bm25Params = Bm25Params(),
    ) -> "Bm25Index":
        items = docs.items() if isinstance(docs, Mapping) else docs

        doc_ids: List[DocId] = []
        lengths: List[int] = []
        seen = set()
        raw_postings: Dict[str, Tuple[List[int], List[int]]] = {}
        for pos, (doc_id, tokens) in enumerate(items):
            if doc_id in seen:
                raise IndexBuildError(f"Duplicate doc_id: {doc_id!r}")
            seen.add(doc_id)
            doc_ids.append(doc_id)
            tokens = list(tokens)
            lengths.append(len(tokens))
            # sorted terms keep the posting dictionary order reproducible
            for term, tf in sorted(Counter(tokens).items()):
                entry = raw_postings.setdefault(term, ([], []))
                entry[0].append(pos)
                entry[1].append(tf)

        if not doc_ids:
            raise IndexBuildError("Cannot build an index over an empty corpus")

        postings = {
            term: (np.asarray(p, dtype=np.int64), np.asarray(f, dtype=np.int64))
            for term, (p, f) in sorted(raw_postings.items())
        }
        index = cls(doc_ids, np.asarray(lengths, dtype=np.int64), postings, params)
        logger.debug(
            f"Built BM25 index: {index.n_docs} docs, {len(postings)} terms, "
            f"avg_doc_len={index.avg_doc_len:.1f}"
        )
        return index

    # ================================================================
    # Scoring
    # ================================================================

    def _length_norm(self, positions: np.ndarray) -> np.ndarray:
        k1, b = self.params.k1, self.params.b
        if self.avg_doc_len <= 0:
            return np.full(len(positions), k1)
        return k1 * (1.0 - b + b * self.doc_len[positions] / self.avg_doc_len)

    def __contains__(self, doc_id: DocId) -> bool:
        return doc_id in self._position

    def score(self, query: Tokens, doc_id: DocId) -> float:
        """BM25 score of one document; repeated query terms count with multiplicity."""
        if doc_id not in self._position:
            raise UnknownDocumentError(f"Unknown doc_id: {doc_id!r}")
        pos = self._position[doc_id]
        k1 = self.params.k1
        total = 0.0
        for term in query:
            entry = self.postings.get(term)
            if entry is None:
                continue
            positions, tfs = entry
            i = int(np.searchsorted(positions, pos))
            if i >= len(positions) or positions[i] != pos:
                continue
            tf = float(tfs[i])
            norm = float(self._length_norm(positions[i:i + 1])[0])
            total += self._idf[term] * tf * (k1 + 1.0) / (tf + norm)
        return total

    def score_all(self, query: Tokens) -> np.ndarray:
        """Scores for every document, in index order."""
        k1 = self.params.k1
        scores = np.zeros(self.n_docs, dtype=np.float64)
        for term, count in Counter(query).items():
            entry = self.postings.get(term)
            if entry is None:
                continue
            positions, tfs = entry
            tf = tfs.astype(np.float64)
            contrib = self._idf[term] * tf * (k1 + 1.0) / (tf + self._length_norm(positions))
            scores[positions] += count * contrib
        return scores

    def top_k(self, query: Tokens, k: int) -> List[ScoredHit]:
        """Up to ``k`` positive-scoring hits, score descending then doc_id ascending."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores = self.score_all(query)
        positive = np.flatnonzero(scores > 0.0)
        ranked = sorted(positive.tolist(), key=lambda i: (-scores[i], self.doc_ids[i]))
        return [ScoredHit(self.doc_ids[i], float(scores[i])) for i in ranked[:k]]

    def top_k_many(self, queries: Sequence[Tokens], k: int, workers: int = 1) -> List[List[ScoredHit]]:
        """Parallel :meth:`top_k` over many queries; output order follows input order."""
        if workers == 1 or len(queries) < 2:
            return [self.top_k(q, k) for q in queries]
        return Parallel(n_jobs=workers, prefer="threads")(
            delayed(self.top_k)(q, k) for q in queries
        )

    # ================================================================
    # Persistence
    # ================================================================

    def save(self, path: str) -> None:
        payload = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "params": {"k1": self.params.k1, "b": self.params.b},
            "doc_ids": list(self.doc_ids),
            "doc_len": self.doc_len,
            "postings": self.postings,
        }
        joblib.dump(payload, path)
        logger.info(f"Saved BM25 index ({self.n_docs} docs) to {path}")

    @classmethod
    def load(cls, path: str) -> "Bm25Index":
        try:
            payload = joblib.load(path)
        except Exception as exc:
            raise IndexFormatError(f"Cannot load index from {path}: {exc}") from exc
        if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
            raise IndexFormatError(f"{path} is not a BM25 index file")
        if payload.get("version") != INDEX_VERSION:
            raise IndexFormatError(
                f"{path}: unsupported index version {payload.get('version')}, "
                f"expected {INDEX_VERSION}"
            )
        params = Bm25Params(**payload["params"])
        doc_ids = [tuple(d) if isinstance(d, list) else d for d in payload["doc_ids"]]
        return cls(doc_ids, payload["doc_len"], payload["postings"], params)


def build_index(
    docs: Union[Mapping[DocId, Tokens], Iterable[Tuple[DocId, Tokens]]],
    params: Bm25Params = Bm25Params(),
) -> Bm25Index:
    """Build an index; raises IndexBuildError on an empty corpus or duplicate ids."""
    return Bm25Index.build(docs, params)
