"""Tests for perplexity-threshold in-domain selection."""

import io
import os

import numpy as np
import pytest

from benchmarks.bench_retrieval import domain_separation_trial, make_domain_sentences
from core.exceptions import DataLoadError
from ml.indomain_selector import (
    SelectionConfig,
    filter_scored,
    filter_scored_tsv,
    format_row,
    iter_perplexities,
    read_scored_tsv,
    select_indomain,
    write_scored_tsv,
)
from ml.ngram_lm import perplexity, train_lm

KEPT = [35.01, 87.62, 99.30, 152.27]


@pytest.fixture
def small_lm():
    rng = np.random.default_rng(1)
    return train_lm(make_domain_sentences(rng, "a", n=200, vocab_size=20), n=2)


class TestSelectionConfig:
    """Threshold validation."""

    def test_defaults(self):
        assert SelectionConfig().threshold == 200.0

    @pytest.mark.parametrize("kwargs", [
        {"threshold": 0},
        {"threshold": -5},
        {"threshold": 100, "min_threshold": 150},
        {"threshold": 100, "min_threshold": -1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SelectionConfig(**kwargs)

    def test_keep_below_is_inclusive(self):
        cfg = SelectionConfig(200.0)
        assert cfg.keeps(200.0)
        assert not cfg.keeps(200.0001)

    def test_band(self):
        cfg = SelectionConfig(200.0, min_threshold=50.0)
        assert [cfg.keeps(s) for s in (35.0, 50.0, 120.0, 250.0)] == [False, True, True, False]


class TestFilterScored:
    """Partition of pre-scored rows."""

    def test_published_partition(self, scored_rows):
        kept = list(filter_scored(scored_rows, SelectionConfig(200.0)))
        assert [score for _, score in kept] == KEPT

    def test_threshold_below_minimum(self, scored_rows):
        assert list(filter_scored(scored_rows, SelectionConfig(10.0))) == []

    def test_huge_threshold_is_identity(self, scored_rows):
        assert list(filter_scored(scored_rows, SelectionConfig(1e300))) == scored_rows

    def test_idempotent(self, scored_rows):
        cfg = SelectionConfig(200.0)
        once = list(filter_scored(scored_rows, cfg))
        assert list(filter_scored(once, cfg)) == once


class TestSelectIndomain:
    """Scoring with a trained model."""

    def test_exactly_predicate(self, small_lm):
        rng = np.random.default_rng(2)
        sentences = make_domain_sentences(rng, "a", n=30, vocab_size=20) + make_domain_sentences(rng, "b", n=30)
        scores = [perplexity(small_lm, s) for s in sentences]
        threshold = float(np.median(scores))
        selected = select_indomain(small_lm, sentences, SelectionConfig(threshold), batch_size=7)
        expected = [(s, p) for s, p in zip(sentences, scores) if p <= threshold]
        assert selected == expected

    def test_parallel_matches_serial(self, small_lm):
        rng = np.random.default_rng(3)
        sentences = make_domain_sentences(rng, "a", n=50, vocab_size=20)
        serial = list(iter_perplexities(small_lm, sentences, batch_size=8, workers=1))
        parallel = list(iter_perplexities(small_lm, sentences, batch_size=8, workers=2))
        assert serial == parallel

    def test_domain_separation(self):
        wins = 0
        for trial in range(100):
            pp_in, pp_out = domain_separation_trial(seed=trial)
            wins += pp_in < pp_out
        assert wins >= 99


class TestScoredTsv:
    """TSV formatting and streaming reads."""

    def test_format_row(self):
        assert format_row("tòa án", 35.0) == "35.000000\ttòa án\n"

    def test_write_then_filter(self, tmpdir_path, scored_rows):
        path = os.path.join(tmpdir_path, "scored.tsv")
        with open(path, "w", encoding="utf-8") as f:
            assert write_scored_tsv(f, scored_rows) == 8
        kept = list(filter_scored_tsv(path, SelectionConfig(200.0), chunksize=3))
        assert [score for _, score in kept] == KEPT
        assert kept[0][0] == scored_rows[0][0]

    def test_read_fixture(self, scored_tsv, scored_rows):
        assert list(read_scored_tsv(scored_tsv)) == scored_rows

    def test_quotes_survive(self, tmpdir_path):
        path = os.path.join(tmpdir_path, "q.tsv")
        buf = io.StringIO()
        write_scored_tsv(buf, [('Khoản "a" điều 5', 12.5)])
        with open(path, "w", encoding="utf-8") as f:
            f.write(buf.getvalue())
        assert list(read_scored_tsv(path)) == [('Khoản "a" điều 5', 12.5)]

    def test_empty_file(self, tmpdir_path):
        path = os.path.join(tmpdir_path, "empty.tsv")
        open(path, "w").close()
        assert list(read_scored_tsv(path)) == []

    def test_bad_score(self, tmpdir_path):
        path = os.path.join(tmpdir_path, "bad.tsv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("12.0\tfine\nabc\tbroken\n")
        with pytest.raises(DataLoadError):
            list(read_scored_tsv(path))

    def test_non_finite_score(self, tmpdir_path):
        path = os.path.join(tmpdir_path, "inf.tsv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("12.0\tfine\ninf\tbroken\n")
        with pytest.raises(DataLoadError) as info:
            list(read_scored_tsv(path))
        assert info.value.record_index == 1

    def test_missing_file(self, tmpdir_path):
        with pytest.raises(DataLoadError):
            list(read_scored_tsv(os.path.join(tmpdir_path, "none.tsv")))
