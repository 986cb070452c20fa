"""Tests for sliding-window segmentation and representative passages."""

import numpy as np
import pytest

from core.exceptions import SegmentationError
from core.segmenter import SegmentationConfig, representative_passage, segment
from core.text_normalizer import TokenSeq


def _tokens(n):
    return [f"w{i}" for i in range(n)]


class TestSegmentationConfig:
    """Window / stride validation."""

    def test_defaults(self):
        cfg = SegmentationConfig()
        assert (cfg.window, cfg.stride) == (200, 100)

    def test_stride_larger_than_window(self):
        with pytest.raises(SegmentationError):
            SegmentationConfig(window=4, stride=5)

    def test_zero_stride(self):
        with pytest.raises(SegmentationError):
            SegmentationConfig(window=4, stride=0)


class TestSegment:
    """Passage boundaries."""

    @pytest.mark.parametrize(
        "n, window, stride, offsets, lengths",
        [
            (10, 4, 3, [0, 3, 6], [4, 4, 4]),
            (10, 4, 2, [0, 2, 4, 6], [4, 4, 4, 4]),
            (3, 4, 2, [0], [3]),
            (450, 200, 100, [0, 100, 200, 300], [200, 200, 200, 150]),
        ],
    )
    def test_examples(self, n, window, stride, offsets, lengths):
        passages = segment(_tokens(n), SegmentationConfig(window, stride))
        assert [p.token_offset for p in passages] == offsets
        assert [len(p) for p in passages] == lengths

    def test_empty_article(self):
        assert segment([], SegmentationConfig(4, 2)) == []

    def test_provenance(self):
        passages = segment(_tokens(6), SegmentationConfig(4, 2), article_id=("law", "7"))
        assert [p.passage_index for p in passages] == [0, 1]
        assert all(p.article_id == ("law", "7") for p in passages)
        assert passages[1].text == "w2 w3 w4 w5"

    def test_token_seq_spans_survive(self):
        seq = TokenSeq.from_tokens(["ab", "cd", "ef"])
        passages = segment(seq, SegmentationConfig(2, 1))
        assert passages[1].tokens.spans == ((3, 5), (6, 8))

    def test_random_coverage(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            n = int(rng.integers(0, 300))
            window = int(rng.integers(1, 50))
            stride = int(rng.integers(1, window + 1))
            tokens = _tokens(n)
            passages = segment(tokens, SegmentationConfig(window, stride))

            if n == 0:
                assert passages == []
                continue
            covered = np.zeros(n, dtype=bool)
            for i, p in enumerate(passages):
                assert p.token_offset == i * stride
                assert 1 <= len(p) <= window
                assert list(p.tokens) == tokens[p.token_offset:p.token_offset + len(p)]
                covered[p.token_offset:p.token_offset + len(p)] = True
            assert covered.all()
            assert passages[-1].token_offset + len(passages[-1]) == n
            # generation stops at the first passage reaching the end
            assert all(p.token_offset + len(p) < n for p in passages[:-1])


class TestRepresentativePassage:
    """Best passage per question."""

    def test_single_passage(self):
        passages = segment(_tokens(3), SegmentationConfig(4, 2))
        assert representative_passage(["w0"], passages) is passages[0]

    def test_terms_in_one_passage(self):
        tokens = ["a", "b", "c", "d", "x", "y", "z", "q"]
        passages = segment(tokens, SegmentationConfig(2, 2))
        best = representative_passage(["x", "y"], passages)
        assert best.passage_index == 2

    def test_no_overlap_picks_first(self):
        passages = segment(_tokens(10), SegmentationConfig(4, 3))
        assert representative_passage(["nothing"], passages).passage_index == 0

    def test_tie_goes_to_lowest_index(self):
        tokens = ["a", "b", "a", "b", "a", "b"]
        passages = segment(tokens, SegmentationConfig(2, 2))
        assert representative_passage(["a"], passages).passage_index == 0

    def test_permutation_invariant(self):
        tokens = ["a", "b", "c", "d", "x", "y", "z", "q"]
        passages = segment(tokens, SegmentationConfig(2, 2))
        best = representative_passage(["z", "q"], passages)
        assert representative_passage(["z", "q"], list(reversed(passages))) == best

    def test_empty_list(self):
        with pytest.raises(SegmentationError):
            representative_passage(["a"], [])
