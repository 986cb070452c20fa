"""
Segmenter — sliding-window passages
====================================

Long articles are broken into overlapping token windows. Passage i starts at
i·stride and spans min(window, remaining) tokens; generation stops after the
first passage that reaches the article end, so with stride ≤ window every
token lands in at least one passage.

For training pairs, one passage stands in for the whole article: the one
the question scores highest against under BM25, computed over a mini-index
of that article's own passages.
"""

import logging
from dataclasses import dataclass
from typing import Hashable, List, Sequence, Union

from core.bm25_index import Bm25Params, build_index
from core.exceptions import SegmentationError
from core.text_normalizer import TokenSeq, as_token_seq

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentationConfig:
    window: int = 200
    stride: int = 100

    def __post_init__(self):
        if not (isinstance(self.window, int) and isinstance(self.stride, int)):
            raise SegmentationError("window and stride must be integers")
        if not (1 <= self.stride <= self.window):
            raise SegmentationError(
                f"need 1 <= stride <= window, got window={self.window} stride={self.stride}"
            )


@dataclass(frozen=True)
class Passage:
    """A window of one article's tokens, with provenance."""
    article_id: Hashable
    passage_index: int
    token_offset: int
    tokens: TokenSeq

    @property
    def text(self) -> str:
        return self.tokens.text

    @property
    def surface_text(self) -> str:
        """The passage as readable text, for scorers and training pairs."""
        return self.tokens.surface

    def __len__(self) -> int:
        return len(self.tokens)


def segment(
    article_tokens: Union[TokenSeq, Sequence[str]],
    cfg: SegmentationConfig = SegmentationConfig(),
    article_id: Hashable = "",
) -> List[Passage]:
    """Split an article into passages; an empty article yields an empty list."""
    tokens = as_token_seq(article_tokens)
    n = len(tokens)
    passages: List[Passage] = []
    start = 0
    while start < n:
        end = min(start + cfg.window, n)
        passages.append(Passage(article_id, len(passages), start, tokens[start:end]))
        if end >= n:
            break
        start += cfg.stride
    return passages


def representative_passage(
    question: Union[TokenSeq, Sequence[str]],
    passages: Sequence[Passage],
    params: Bm25Params = Bm25Params(),
) -> Passage:
    """The passage the question scores highest against; ties go to the lowest passage_index."""
    if not passages:
        raise SegmentationError("representative_passage needs at least one passage")
    if len(passages) == 1:
        return passages[0]

    mini = build_index({p.passage_index: p.tokens for p in passages}, params)
    by_index = {p.passage_index: p for p in passages}
    best = min(
        by_index,
        key=lambda idx: (-mini.score(question, idx), idx),
    )
    return by_index[best]
