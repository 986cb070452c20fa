"""
In-domain Selector — perplexity threshold selection
====================================================

Scores sentences of a large general corpus with the in-domain LM and keeps
those whose perplexity lies within the threshold (lower = closer to the
legal domain). Sentences stream through in batches, so a multi-GB corpus
never sits in memory; batches may be scored in parallel, output order
always follows input order.

TSV output: ``<perplexity>\\t<sentence>`` per line.
"""

import csv
import logging
import math
import os
from dataclasses import dataclass
from itertools import islice
from typing import Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple

import pandas as pd
from joblib import Parallel, delayed

from core.exceptions import DataLoadError
from ml.ngram_lm import NGramLm, perplexity

logger = logging.getLogger(__name__)

Sentence = Sequence[str]


@dataclass(frozen=True)
class SelectionConfig:
    """Keep sentences with ``min_threshold ≤ PP ≤ threshold`` (lower bound optional)."""
    threshold: float = 200.0
    min_threshold: Optional[float] = None

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold}")
        if self.min_threshold is not None and not (0 <= self.min_threshold <= self.threshold):
            raise ValueError(
                f"min_threshold must be in [0, threshold], got {self.min_threshold}"
            )

    def keeps(self, score: float) -> bool:
        if score > self.threshold:
            return False
        return self.min_threshold is None or score >= self.min_threshold


def _batches(items: Iterable, size: int) -> Iterator[list]:
    it = iter(items)
    while True:
        batch = list(islice(it, size))
        if not batch:
            return
        yield batch


def iter_perplexities(
    lm: NGramLm,
    sentences: Iterable[Sentence],
    batch_size: int = 1000,
    workers: int = 1,
) -> Iterator[Tuple[Sentence, float]]:
    """Stream ``(sentence, PP)`` pairs in input order."""
    parallel = Parallel(n_jobs=workers, prefer="threads") if workers != 1 else None
    for batch in _batches(sentences, batch_size):
        if parallel is None:
            scores = [perplexity(lm, s) for s in batch]
        else:
            scores = parallel(delayed(perplexity)(lm, s) for s in batch)
        yield from zip(batch, scores)


def iter_select_indomain(
    lm: NGramLm,
    sentences: Iterable[Sentence],
    cfg: SelectionConfig,
    batch_size: int = 1000,
    workers: int = 1,
) -> Iterator[Tuple[Sentence, float]]:
    seen = kept = 0
    for sentence, score in iter_perplexities(lm, sentences, batch_size, workers):
        seen += 1
        if cfg.keeps(score):
            kept += 1
            yield sentence, score
    logger.info(f"In-domain selection: kept {kept}/{seen} sentences (threshold={cfg.threshold})")


def select_indomain(
    lm: NGramLm,
    sentences: Iterable[Sentence],
    cfg: SelectionConfig,
    batch_size: int = 1000,
    workers: int = 1,
) -> List[Tuple[Sentence, float]]:
    """Exactly the sentences with PP within the threshold, each with its score, input order kept."""
    return list(iter_select_indomain(lm, sentences, cfg, batch_size, workers))


def filter_scored(rows: Iterable[Tuple[str, float]], cfg: SelectionConfig) -> Iterator[Tuple[str, float]]:
    """Re-threshold already scored ``(sentence, PP)`` rows without an LM."""
    for sentence, score in rows:
        if cfg.keeps(score):
            yield sentence, score


# ================================================================
# TSV I/O
# ================================================================


def format_row(sentence: str, score: float) -> str:
    return f"{score:.6f}\t{sentence}\n"


def write_scored_tsv(out: TextIO, rows: Iterable[Tuple[str, float]]) -> int:
    n = 0
    for sentence, score in rows:
        out.write(format_row(sentence, score))
        n += 1
    return n


def read_scored_tsv(path: str, chunksize: int = 100_000) -> Iterator[Tuple[str, float]]:
    """Stream ``score<TAB>sentence`` rows from a TSV file in chunks."""
    if not os.path.exists(path):
        raise DataLoadError(f"File not found: {path}")
    if os.path.getsize(path) == 0:
        return
    offset = 0
    try:
        reader = pd.read_csv(
            path,
            sep="\t",
            header=None,
            names=["score", "sentence"],
            dtype={"score": "float64", "sentence": "string"},
            quoting=csv.QUOTE_NONE,
            keep_default_na=False,
            chunksize=chunksize,
            encoding="utf-8",
        )
        for chunk in reader:
            for i, (score, sentence) in enumerate(zip(chunk["score"], chunk["sentence"])):
                if not math.isfinite(score):
                    raise DataLoadError(f"{path}: row {offset + i} has a non-finite score", offset + i, "score")
                yield str(sentence), float(score)
            offset += len(chunk)
    except (ValueError, pd.errors.ParserError) as exc:
        raise DataLoadError(f"{path}: malformed TSV near row {offset}: {exc}", offset) from exc


def filter_scored_tsv(path: str, cfg: SelectionConfig, chunksize: int = 100_000) -> Iterator[Tuple[str, float]]:
    """Re-threshold a pre-scored TSV file, streaming."""
    seen = kept = 0
    for sentence, score in read_scored_tsv(path, chunksize):
        seen += 1
        if cfg.keeps(score):
            kept += 1
            yield sentence, score
    logger.info(f"{path}: kept {kept}/{seen} pre-scored sentences (threshold={cfg.threshold})")
