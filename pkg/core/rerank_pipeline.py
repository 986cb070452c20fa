"""
Rerank Pipeline — retrieve, segment, score, aggregate, select
==============================================================

Per question:
    1. BM25 top-k_retrieve articles (whole-article index, or passage index
       collapsed to articles when ``retrieval_unit == "passage"``)
    2. segment every candidate article into passages
    3. score every (question, passage) pair with the configured scorer
    4. article probability = max over its passages
    5. select relevant articles with the selection policy

Also hosts score-level voting over several runs and the submission file
format (JSON array plus a ``.meta.json`` sidecar carrying probabilities,
policy and provenance).
"""

import logging
import os
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from core.bm25_index import Bm25Index
from core.exceptions import DataLoadError, VoteError
from core.segmenter import SegmentationConfig, segment
from core.text_normalizer import TextPipeline, TokenSeq
from data.corpus_loader import Article, ArticleKey, Question, read_json, write_json
from ml.scorers import LexicalScorer, Scorer, ScoreRequest, score_pairs

logger = logging.getLogger(__name__)

SELECTION_KINDS = ("top1", "threshold")
RETRIEVAL_UNITS = ("article", "passage")
META_FORMAT = "run-metadata"
META_VERSION = 1


@dataclass(frozen=True)
class SelectionPolicy:
    kind: str = "top1"
    tau: float = 0.5

    def __post_init__(self):
        if self.kind not in SELECTION_KINDS:
            raise ValueError(f"selection kind must be one of {SELECTION_KINDS}, got {self.kind!r}")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class PipelineConfig:
    k_retrieve: int = 150
    seg: SegmentationConfig = field(default_factory=SegmentationConfig)
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    retrieval_unit: str = "article"
    workers: int = 1

    def __post_init__(self):
        if self.k_retrieve < 1:
            raise ValueError(f"k_retrieve must be >= 1, got {self.k_retrieve}")
        if self.retrieval_unit not in RETRIEVAL_UNITS:
            raise ValueError(
                f"retrieval_unit must be one of {RETRIEVAL_UNITS}, got {self.retrieval_unit!r}"
            )


@dataclass(frozen=True)
class ArticleProbability:
    law_id: str
    article_id: str
    probability: float

    @property
    def key(self) -> ArticleKey:
        return (self.law_id, self.article_id)


@dataclass
class RunResult:
    """Ranked article probabilities per question plus how they were produced."""
    predictions: Dict[str, List[ArticleProbability]]
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def probabilities(self, question_id: str) -> Dict[ArticleKey, float]:
        return {ap.key: ap.probability for ap in self.predictions.get(question_id, [])}

    @property
    def selected(self) -> Dict[str, FrozenSet[ArticleKey]]:
        return {
            qid: select_relevant(self.probabilities(qid), self.policy)
            for qid in sorted(self.predictions)
        }

    @property
    def question_ids(self) -> List[str]:
        return sorted(self.predictions)


# ================================================================
# Aggregation & selection
# ================================================================


def aggregate_article(passage_probs: Sequence[float]) -> float:
    """An article is as relevant as its best passage."""
    if len(passage_probs) == 0:
        raise ValueError("aggregate_article needs at least one passage probability")
    return max(passage_probs)


def select_relevant(article_probs: Mapping[ArticleKey, float], policy: SelectionPolicy) -> FrozenSet[ArticleKey]:
    """
    top1: the argmax article (ties → smallest (law_id, article_id)).
    threshold: every article with probability ≥ tau, or the argmax when none qualifies.
    No candidates → empty set.
    """
    if not article_probs:
        return frozenset()
    best = min(article_probs, key=lambda key: (-article_probs[key], key))
    if policy.kind == "top1":
        return frozenset([best])
    chosen = frozenset(key for key, p in article_probs.items() if p >= policy.tau)
    return chosen or frozenset([best])


def _rank(probs: Mapping[ArticleKey, float]) -> List[ArticleProbability]:
    ordered = sorted(probs.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ArticleProbability(key[0], key[1], p) for key, p in ordered]


# ================================================================
# Pipeline
# ================================================================


class RerankPipeline:
    """
    Question → ranked article probabilities, for one corpus and one scorer.

    The builtin scorer is pure, so questions are scored on a thread pool;
    an external scorer owns one child process and receives batches serially.
    """

    def __init__(
        self,
        corpus: Sequence[Article],
        index: Bm25Index,
        scorer: Scorer,
        cfg: PipelineConfig = PipelineConfig(),
        pipeline: Optional[TextPipeline] = None,
        article_tokens: Optional[Mapping[ArticleKey, TokenSeq]] = None,
    ):
        self.corpus = corpus
        self.index = index
        self.scorer = scorer
        self.cfg = cfg
        self.pipeline = pipeline or TextPipeline()
        if article_tokens is None:
            article_tokens = {a.key: self.pipeline.process(a.text) for a in corpus}
        self.article_tokens = article_tokens
        self._passage_index: Optional[Bm25Index] = None
        if cfg.retrieval_unit == "passage":
            self._passage_index = self._build_passage_index()

    def _build_passage_index(self) -> Bm25Index:
        docs = []
        for key in sorted(self.article_tokens):
            for p in segment(self.article_tokens[key], self.cfg.seg, article_id=key):
                docs.append(((key[0], key[1], p.passage_index), p.tokens))
        logger.info(f"Built passage-level index over {len(docs)} passages")
        return Bm25Index.build(docs, self.index.params)

    def candidates(self, q_tokens: TokenSeq) -> List[ArticleKey]:
        """Top articles for a question, best first."""
        k = self.cfg.k_retrieve
        if self._passage_index is None:
            return [hit.doc_id for hit in self.index.top_k(q_tokens, k)]

        articles: List[ArticleKey] = []
        seen = set()
        for hit in self._passage_index.top_k(q_tokens, self._passage_index.n_docs):
            key = (hit.doc_id[0], hit.doc_id[1])
            if key not in seen:
                seen.add(key)
                articles.append(key)
                if len(articles) == k:
                    break
        return articles

    def score_question(self, question: Question) -> List[ArticleProbability]:
        q_tokens = self.pipeline.process(question.text)
        keys = self.candidates(q_tokens)
        if not keys:
            logger.warning(f"{question.question_id}: no candidate articles, empty prediction")
            return []

        requests: List[ScoreRequest] = []
        owner: Dict[str, ArticleKey] = {}
        for key in keys:
            for passage in segment(self.article_tokens[key], self.cfg.seg, article_id=key):
                pair_id = f"{question.question_id}#{len(requests)}"
                requests.append(ScoreRequest(pair_id, question.text, passage.surface_text))
                owner[pair_id] = key
        if not requests:
            return []

        per_article: Dict[ArticleKey, List[float]] = defaultdict(list)
        for resp in score_pairs(self.scorer, requests):
            per_article[owner[resp.pair_id]].append(resp.probability)
        return _rank({key: aggregate_article(ps) for key, ps in per_article.items()})

    def run(self, questions: Sequence[Question]) -> RunResult:
        start = time.time()
        ordered = sorted(questions, key=lambda q: q.question_id)
        parallel_ok = isinstance(self.scorer, LexicalScorer) and self.cfg.workers != 1
        if parallel_ok:
            ranked = Parallel(n_jobs=self.cfg.workers, prefer="threads")(
                delayed(self.score_question)(q) for q in ordered
            )
        else:
            ranked = [self.score_question(q) for q in ordered]

        result = RunResult(
            predictions={q.question_id: r for q, r in zip(ordered, ranked)},
            policy=self.cfg.policy,
            provenance=self.provenance(),
        )
        n_empty = sum(1 for r in ranked if not r)
        logger.info(
            f"Pipeline scored {len(ordered)} questions with {self.scorer.name} "
            f"(k={self.cfg.k_retrieve}, unit={self.cfg.retrieval_unit}), "
            f"{n_empty} empty prediction(s) ({time.time() - start:.1f}s)"
        )
        return result

    def provenance(self) -> Dict[str, Any]:
        return {
            "scorer": self.scorer.name,
            "k_retrieve": self.cfg.k_retrieve,
            "retrieval_unit": self.cfg.retrieval_unit,
            "window": self.cfg.seg.window,
            "stride": self.cfg.seg.stride,
        }


def run_pipeline(
    questions: Sequence[Question],
    corpus: Sequence[Article],
    index: Bm25Index,
    cfg: PipelineConfig = PipelineConfig(),
    scorer: Optional[Scorer] = None,
    pipeline: Optional[TextPipeline] = None,
) -> RunResult:
    """One-shot pipeline run; defaults to the builtin lexical scorer."""
    pipeline = pipeline or TextPipeline()
    scorer = scorer or LexicalScorer(pipeline, index.params)
    return RerankPipeline(corpus, index, scorer, cfg, pipeline).run(questions)


# ================================================================
# Voting
# ================================================================


def vote(
    runs: Sequence[RunResult],
    weights: Optional[Sequence[float]] = None,
    policy: Optional[SelectionPolicy] = None,
) -> RunResult:
    """
    Score-level vote: per article, the weighted mean of per-run probabilities
    (an article missing from a run counts 0), then selection is re-applied.
    """
    if not runs:
        raise VoteError("vote needs at least one run")
    qids = set(runs[0].predictions)
    for i, run in enumerate(runs[1:], start=1):
        if set(run.predictions) != qids:
            diff = sorted(qids ^ set(run.predictions))
            raise VoteError(f"run #{i} covers a different question set (first difference: {diff[0]})")

    if weights is None:
        weights = [1.0] * len(runs)
    if len(weights) != len(runs):
        raise VoteError(f"got {len(weights)} weights for {len(runs)} runs")
    if any(w < 0 for w in weights):
        raise VoteError(f"weights must be non-negative, got {list(weights)}")
    if len(runs) == 1:
        # a lone run passes through unchanged, zero weight included
        norm = [1.0]
    else:
        total = float(sum(weights))
        if total <= 0:
            raise VoteError(f"weights must have a positive sum, got {list(weights)}")
        norm = [w / total for w in weights]

    predictions: Dict[str, List[ArticleProbability]] = {}
    for qid in sorted(qids):
        combined: Dict[ArticleKey, float] = defaultdict(float)
        for run, w in zip(runs, norm):
            for ap in run.predictions[qid]:
                combined[ap.key] += w * ap.probability
        predictions[qid] = _rank(combined)

    provenance = {
        "vote": [run.provenance for run in runs],
        "weights": list(weights),
    }
    return RunResult(predictions, policy or runs[0].policy, provenance)


# ================================================================
# Submission files
# ================================================================


def meta_path(path: str) -> str:
    return path + ".meta.json"


def write_submission(path: str, run: RunResult) -> List[str]:
    """Write the submission and its sidecar; returns the paths written."""
    selected = run.selected
    submission = [
        {
            "question_id": qid,
            "relevant_articles": [
                {"law_id": law_id, "article_id": article_id}
                for law_id, article_id in sorted(selected[qid])
            ],
        }
        for qid in sorted(selected)
    ]
    write_json(path, submission)

    meta = {
        "format": META_FORMAT,
        "version": META_VERSION,
        "policy": asdict(run.policy),
        "provenance": run.provenance,
        "predictions": {
            qid: [[ap.law_id, ap.article_id, ap.probability] for ap in run.predictions[qid]]
            for qid in sorted(run.predictions)
        },
    }
    write_json(meta_path(path), meta)
    logger.info(f"Wrote submission for {len(submission)} questions to {path}")
    return [path, meta_path(path)]


def load_submission(path: str) -> Dict[str, FrozenSet[ArticleKey]]:
    """question_id → selected articles; a questions file reads as its gold run."""
    records = read_json(path)
    if not isinstance(records, list):
        raise DataLoadError(f"{path}: top level must be a JSON array")
    out: Dict[str, FrozenSet[ArticleKey]] = {}
    for i, record in enumerate(records):
        if not isinstance(record, dict) or not isinstance(record.get("question_id"), str):
            raise DataLoadError(f"{path}: record #{i} has no question_id", i, "question_id")
        qid = record["question_id"]
        if qid in out:
            raise DataLoadError(f"{path}: duplicate question_id {qid}", i, "question_id")
        links = record.get("relevant_articles", [])
        try:
            out[qid] = frozenset((str(l["law_id"]), str(l["article_id"])) for l in links)
        except (KeyError, TypeError) as exc:
            raise DataLoadError(f"{path}: record #{i} has a malformed article link", i, "relevant_articles") from exc
    return out


def read_run(path: str) -> RunResult:
    """
    Load a run from a submission file, with probabilities from its sidecar
    when present. Without a sidecar every selected article gets probability 1
    and the policy keeps exactly those.
    """
    selections = load_submission(path)
    sidecar = meta_path(path)
    if not os.path.exists(sidecar):
        predictions = {
            qid: [ArticleProbability(law, art, 1.0) for law, art in sorted(keys)]
            for qid, keys in selections.items()
        }
        return RunResult(predictions, SelectionPolicy("threshold", 1.0), {"source": path})

    meta = read_json(sidecar)
    if not isinstance(meta, dict) or meta.get("format") != META_FORMAT:
        raise DataLoadError(f"{sidecar} is not a run metadata file")
    if meta.get("version") != META_VERSION:
        raise DataLoadError(f"{sidecar}: unsupported metadata version {meta.get('version')}")
    try:
        predictions = {
            qid: [ArticleProbability(str(law), str(art), float(p)) for law, art, p in rows]
            for qid, rows in meta["predictions"].items()
        }
        policy = SelectionPolicy(**meta["policy"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataLoadError(f"{sidecar}: malformed metadata: {exc}") from exc
    if set(predictions) != set(selections):
        raise DataLoadError(f"{sidecar}: question set differs from {path}")
    return RunResult(predictions, policy, dict(meta.get("provenance", {})))


def iter_runs(paths: Iterable[str]) -> List[RunResult]:
    return [read_run(p) for p in paths]
