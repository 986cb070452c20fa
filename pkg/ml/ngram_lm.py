"""
N-gram Language Model — interpolated absolute discounting
==========================================================

Statistical LM trained on in-domain legal sentences, used to score
sentences of another corpus by perplexity.

    p(w|c) = max(C(c,w) − d, 0) / C(c) + λ(c) · p(w|c')      c' = c minus its oldest token
    λ(c)   = d · |{w : C(c,w) > 0}| / C(c)
    p(w)   = (C(w) + 1) / (N + |V|)                          add-one unigram base

Unseen contexts back off fully to c'. Each sentence is padded with n−1 start
sentinels and one end sentinel; training tokens seen fewer than
``unk_threshold`` times become the unknown token.

The start sentinel is part of the vocabulary but never predicted, so every
conditional distribution is over the vocabulary minus ``<s>``.
"""

import logging
import math
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import joblib

from core.exceptions import LanguageModelError, ModelFormatError

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

MODEL_FORMAT = "ngram-lm"
MODEL_VERSION = 1

Context = Tuple[str, ...]


@dataclass
class NGramLm:
    """Trained counts plus the cached per-context totals the formula needs."""
    n: int
    vocab: FrozenSet[str]
    counts: Dict[Context, Dict[str, int]]
    discount: float
    unk_threshold: int
    _totals: Dict[Context, int] = field(default_factory=dict, init=False, repr=False)
    _types: Dict[Context, int] = field(default_factory=dict, init=False, repr=False)
    _unigram_total: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        for ctx, dist in self.counts.items():
            self._totals[ctx] = sum(dist.values())
            self._types[ctx] = sum(1 for c in dist.values() if c > 0)
        self._unigram_total = self._totals.get((), 0)
        self._predict_vocab = frozenset(self.vocab - {BOS})

    @property
    def predict_vocab(self) -> FrozenSet[str]:
        """Tokens that can be predicted (vocabulary without the start sentinel)."""
        return self._predict_vocab

    def map_token(self, token: str) -> str:
        return token if token in self.vocab and token != BOS else UNK

    def prob(self, word: str, context: Sequence[str] = ()) -> float:
        """p(word | context); context longer than n−1 is truncated to its last n−1 tokens."""
        ctx = tuple(t if t == BOS else self.map_token(t) for t in context)
        ctx = ctx[-(self.n - 1):] if self.n > 1 else ()
        return self._prob(self.map_token(word), ctx)

    def _prob(self, word: str, ctx: Context) -> float:
        if not ctx:
            c = self.counts.get((), {}).get(word, 0)
            return (c + 1.0) / (self._unigram_total + len(self._predict_vocab))
        lower = self._prob(word, ctx[1:])
        total = self._totals.get(ctx, 0)
        if total == 0:
            return lower
        c = self.counts[ctx].get(word, 0)
        lam = self.discount * self._types[ctx] / total
        return max(c - self.discount, 0.0) / total + lam * lower

    def log_prob(self, word: str, context: Sequence[str] = ()) -> float:
        return math.log(self.prob(word, context))

    def conditional_distribution(self, context: Sequence[str]) -> Dict[str, float]:
        """Full distribution over the predictable vocabulary for one context."""
        return {w: self.prob(w, context) for w in sorted(self._predict_vocab)}

    def observed_contexts(self) -> List[Context]:
        return sorted(self.counts)

    def padded(self, sentence: Sequence[str]) -> List[str]:
        return [BOS] * (self.n - 1) + [self.map_token(t) for t in sentence] + [EOS]

    # ================================================================
    # Persistence
    # ================================================================

    def save(self, path: str) -> None:
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "n": self.n,
            "discount": self.discount,
            "unk_threshold": self.unk_threshold,
            "vocab": sorted(self.vocab),
            "counts": {ctx: dict(dist) for ctx, dist in self.counts.items()},
        }
        joblib.dump(payload, path)
        logger.info(f"Saved {self.n}-gram LM ({len(self.vocab)} types) to {path}")

    @classmethod
    def load(cls, path: str) -> "NGramLm":
        try:
            payload = joblib.load(path)
        except Exception as exc:
            raise ModelFormatError(f"Cannot load language model from {path}: {exc}") from exc
        if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
            raise ModelFormatError(f"{path} is not an n-gram LM file")
        if payload.get("version") != MODEL_VERSION:
            raise ModelFormatError(
                f"{path}: unsupported LM version {payload.get('version')}, expected {MODEL_VERSION}"
            )
        return cls(
            n=payload["n"],
            vocab=frozenset(payload["vocab"]),
            counts=payload["counts"],
            discount=payload["discount"],
            unk_threshold=payload["unk_threshold"],
        )


def train_lm(
    sentences: Iterable[Sequence[str]],
    n: int = 3,
    discount: float = 0.75,
    unk_threshold: int = 2,
) -> NGramLm:
    """
    Count n-grams of every order up to ``n`` over padded sentences.

    Raises:
        LanguageModelError: empty corpus or invalid parameters
    """
    if n < 1:
        raise LanguageModelError(f"order n must be >= 1, got {n}")
    if not (0.0 < discount < 1.0):
        raise LanguageModelError(f"discount must be in (0, 1), got {discount}")
    if unk_threshold < 1:
        raise LanguageModelError(f"unk_threshold must be >= 1, got {unk_threshold}")

    start = time.time()
    corpus = [list(s) for s in sentences]
    if not corpus:
        raise LanguageModelError("Cannot train a language model on an empty corpus")

    freq = Counter(tok for s in corpus for tok in s)
    vocab = frozenset(w for w, c in freq.items() if c >= unk_threshold) | {BOS, EOS, UNK}

    counts: Dict[Context, Dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for sentence in corpus:
        padded = [BOS] * (n - 1) + [w if w in vocab else UNK for w in sentence] + [EOS]
        for i in range(n - 1, len(padded)):
            word = padded[i]
            for order in range(n):
                ctx = tuple(padded[i - order:i])
                counts[ctx][word] += 1

    lm = NGramLm(
        n=n,
        vocab=vocab,
        counts={ctx: dict(dist) for ctx, dist in counts.items()},
        discount=discount,
        unk_threshold=unk_threshold,
    )
    n_unk = sum(c for w, c in freq.items() if w not in vocab)
    logger.info(
        f"Trained {n}-gram LM on {len(corpus)} sentences: |V|={len(vocab)}, "
        f"{len(lm.counts)} contexts, {n_unk} tokens mapped to {UNK} "
        f"({time.time() - start:.1f}s)"
    )
    return lm


def sentence_log_prob(lm: NGramLm, sentence: Sequence[str]) -> Tuple[float, int]:
    """Total natural-log probability and number of scored positions (end sentinel included)."""
    padded = lm.padded(sentence)
    history = lm.n - 1
    total = 0.0
    for i in range(history, len(padded)):
        total += math.log(lm._prob(padded[i], tuple(padded[i - history:i])))
    return total, len(padded) - history


def perplexity(lm: NGramLm, sentence: Sequence[str]) -> float:
    """exp(−mean log-probability) over tokens plus the end sentinel."""
    total, positions = sentence_log_prob(lm, sentence)
    return math.exp(-total / positions)
