"""Retrieval and language-model benchmarks.

Times the randomized correctness sweeps that have a runtime bound (BM25
against a direct-formula scorer, LM domain separation) plus pipeline and
external-scorer throughput. Synthetic data only, seeded for reproducibility.

Usage::

    python -m benchmarks.bench_retrieval
"""

from __future__ import annotations

import math
import os
import sys
import time
from collections import Counter
from typing import Dict, List, Sequence, Tuple, TypedDict

import numpy as np

from core.bm25_index import Bm25Index, Bm25Params
from core.exceptions import BenchmarkRunError, BenchmarkSetupError
from core.rerank_pipeline import PipelineConfig, run_pipeline
from core.text_normalizer import TextPipeline
from data.corpus_loader import Article, Question
from ml.ngram_lm import perplexity, train_lm
from ml.scorers import ExternalScorer, ScoreRequest, score_pairs


class BenchmarkResult(TypedDict):
    """Standard result dict returned by every benchmark function."""

    name: str
    value: float | None
    unit: str
    detail: str


SCRIPTS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scripts")


# ---------------------------------------------------------------------------
# Synthetic data generators
# ---------------------------------------------------------------------------


def make_random_corpus(
    rng: np.random.Generator,
    max_docs: int = 50,
    max_len: int = 20,
    vocab_size: int = 30,
) -> Dict[str, List[str]]:
    """Random small corpus: ``doc_id -> tokens`` over a ``t0..tN`` vocabulary.

    Raises:
        BenchmarkSetupError: If the corpus cannot be generated.
    """
    try:
        n_docs = int(rng.integers(1, max_docs + 1))
        return {
            f"d{i:03d}": [f"t{v}" for v in rng.integers(0, vocab_size, int(rng.integers(0, max_len + 1)))]
            for i in range(n_docs)
        }
    except Exception as exc:
        raise BenchmarkSetupError(f"Failed to generate random corpus: {exc}") from exc


def make_domain_sentences(
    rng: np.random.Generator,
    prefix: str,
    n: int = 1000,
    vocab_size: int = 100,
    min_len: int = 5,
    max_len: int = 15,
) -> List[List[str]]:
    """Sentences drawn uniformly from a ``<prefix>0..<prefix>N`` vocabulary."""
    try:
        return [
            [f"{prefix}{v}" for v in rng.integers(0, vocab_size, int(rng.integers(min_len, max_len + 1)))]
            for _ in range(n)
        ]
    except Exception as exc:
        raise BenchmarkSetupError(f"Failed to generate {prefix}-domain sentences: {exc}") from exc


# ---------------------------------------------------------------------------
# Reference scorer
# ---------------------------------------------------------------------------


def bm25_brute_force(
    docs: Dict[str, Sequence[str]],
    query: Sequence[str],
    params: Bm25Params = Bm25Params(),
) -> Dict[str, float]:
    """BM25 straight from the formula, one document at a time, no index."""
    n = len(docs)
    avgdl = sum(len(d) for d in docs.values()) / n
    scores: Dict[str, float] = {}
    for doc_id, tokens in docs.items():
        total = 0.0
        # repeated query terms count once per occurrence
        for term, count in Counter(query).items():
            tf = sum(1 for t in tokens if t == term)
            if tf == 0:
                continue
            df = sum(1 for d in docs.values() if term in d)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            norm = params.k1 * (1.0 - params.b + params.b * len(tokens) / avgdl) if avgdl > 0 else params.k1
            total += count * (idf * tf * (params.k1 + 1.0) / (tf + norm))
        scores[doc_id] = total
    return scores


def brute_force_ranking(scores: Dict[str, float], k: int) -> List[Tuple[str, float]]:
    ranked = sorted(((d, s) for d, s in scores.items() if s > 0), key=lambda x: (-x[1], x[0]))
    return ranked[:k]


# ---------------------------------------------------------------------------
# Benchmark runners
# ---------------------------------------------------------------------------


def bench_bm25_oracle(n_corpora: int = 200, seed: int = 7, tol: float = 1e-9) -> BenchmarkResult:
    """Index scores and rankings against the brute-force scorer on random corpora.

    Raises:
        BenchmarkRunError: On any score or ranking mismatch.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    n_queries = 0
    for c in range(n_corpora):
        docs = make_random_corpus(rng)
        index = Bm25Index.build(docs)
        for _ in range(3):
            query = [f"t{v}" for v in rng.integers(0, 35, int(rng.integers(1, 6)))]
            expected = bm25_brute_force(docs, query)
            for doc_id, score in expected.items():
                if abs(index.score(query, doc_id) - score) > tol:
                    raise BenchmarkRunError(f"corpus {c}: score mismatch for {doc_id} on {query}")
            k = int(rng.integers(1, len(docs) + 2))
            got = [(h.doc_id, h.score) for h in index.top_k(query, k)]
            want = brute_force_ranking(expected, k)
            if [d for d, _ in got] != [d for d, _ in want]:
                raise BenchmarkRunError(f"corpus {c}: ranking mismatch on {query}")
            n_queries += 1
    elapsed = time.perf_counter() - t0
    return BenchmarkResult(
        name="bm25_oracle_sweep",
        value=elapsed,
        unit="seconds",
        detail=f"corpora={n_corpora}, queries={n_queries}",
    )


def domain_separation_trial(seed: int, n_sentences: int = 1000, held_out: int = 100) -> Tuple[float, float]:
    """Median held-out in-domain PP and median out-of-domain PP for one seeded trial."""
    rng = np.random.default_rng(seed)
    inside = make_domain_sentences(rng, "a", n_sentences)
    outside = make_domain_sentences(rng, "b", n_sentences)
    lm = train_lm(inside[:-held_out])
    pp_in = float(np.median([perplexity(lm, s) for s in inside[-held_out:]]))
    pp_out = float(np.median([perplexity(lm, s) for s in outside[:held_out]]))
    return pp_in, pp_out


def bench_domain_separation(trials: int = 100, seed: int = 0) -> BenchmarkResult:
    """Share of trials where in-domain text gets the lower median perplexity."""
    try:
        t0 = time.perf_counter()
        wins = 0
        for trial in range(trials):
            pp_in, pp_out = domain_separation_trial(seed + trial)
            wins += pp_in < pp_out
        elapsed = time.perf_counter() - t0
    except BenchmarkSetupError:
        raise
    except Exception as exc:
        raise BenchmarkRunError(f"bench_domain_separation failed: {exc}") from exc
    return BenchmarkResult(
        name="lm_domain_separation",
        value=wins / trials,
        unit="win rate",
        detail=f"trials={trials}, wins={wins}, elapsed={elapsed:.2f}s",
    )


def bench_pipeline_throughput(n_articles: int = 200, n_questions: int = 50, seed: int = 3) -> BenchmarkResult:
    """Questions per second through the builtin-scorer pipeline."""
    try:
        rng = np.random.default_rng(seed)
        corpus = [
            Article("bench", str(i), " ".join(f"w{v}" for v in rng.integers(0, 500, 120)))
            for i in range(n_articles)
        ]
        questions = [
            Question(f"q{i:03d}", " ".join(corpus[i % n_articles].text.split()[:12]))
            for i in range(n_questions)
        ]
        pipeline = TextPipeline()
        index = Bm25Index.build({a.key: pipeline.process(a.text) for a in corpus})
        t0 = time.perf_counter()
        run_pipeline(questions, corpus, index, PipelineConfig(k_retrieve=20, workers=1), pipeline=pipeline)
        elapsed = time.perf_counter() - t0
    except Exception as exc:
        raise BenchmarkRunError(f"bench_pipeline_throughput failed: {exc}") from exc
    return BenchmarkResult(
        name="pipeline_throughput",
        value=n_questions / elapsed if elapsed > 0 else float("inf"),
        unit="questions/s",
        detail=f"articles={n_articles}, questions={n_questions}, k=20",
    )


def bench_external_scorer(n_pairs: int = 1000) -> BenchmarkResult:
    """Round-trip time of one batch through the reference external scorer."""
    command = [sys.executable, os.path.join(SCRIPTS_DIR, "constant_scorer.py"), "--probability", "0.7"]
    requests = [ScoreRequest(f"p{i}", "câu hỏi", f"đoạn văn {i}") for i in range(n_pairs)]
    try:
        with ExternalScorer(command, timeout=60.0) as scorer:
            t0 = time.perf_counter()
            responses = score_pairs(scorer, requests)
            elapsed = time.perf_counter() - t0
    except Exception as exc:
        raise BenchmarkRunError(f"bench_external_scorer failed: {exc}") from exc
    if [r.pair_id for r in responses] != [r.pair_id for r in requests]:
        raise BenchmarkRunError("external scorer responses are not in request order")
    return BenchmarkResult(
        name="external_scorer_roundtrip",
        value=elapsed,
        unit="seconds",
        detail=f"pairs={n_pairs}",
    )


def run_all() -> list[BenchmarkResult]:
    """Execute every retrieval benchmark and return collected results.

    Returns:
        A list of ``BenchmarkResult`` dicts, one per benchmark (including
        error entries for benchmarks that failed).
    """
    results: list[BenchmarkResult] = []
    print("=" * 60)
    print("Retrieval Benchmark Suite")
    print("=" * 60)

    bench_fns: list = [
        bench_bm25_oracle,
        bench_domain_separation,
        bench_pipeline_throughput,
        bench_external_scorer,
    ]
    for bench_fn in bench_fns:
        try:
            r: BenchmarkResult = bench_fn()
            results.append(r)
            print(
                f"  {r['name']:30s} {r['value']:.6f} {r['unit']:15s}  ({r['detail']})"
            )
        except Exception as e:
            print(f"  {bench_fn.__name__:30s} ERROR: {e}")
            results.append(
                BenchmarkResult(
                    name=bench_fn.__name__,
                    value=None,
                    unit="error",
                    detail=str(e),
                )
            )

    print()
    return results


if __name__ == "__main__":
    run_all()
