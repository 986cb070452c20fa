"""Shared pytest fixtures for the retrieval toolkit test suite."""

import os
import shutil
import sys
import tempfile

import numpy as np
import pytest

# Ensure the project root is importable
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data.corpus_loader import Article, Question, write_corpus, write_questions  # noqa: E402

SCRIPTS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scripts")


@pytest.fixture
def tmpdir_path():
    """Create and yield a temporary directory, cleaned up after the test."""
    path = tempfile.mkdtemp()
    yield path
    shutil.rmtree(path, ignore_errors=True)


@pytest.fixture
def legal_dataset():
    """Return a factory for a synthetic corpus whose questions quote their gold article.

    Article ``i`` uses its own ``k<i>t<j>`` vocabulary plus a shared
    "quy định pháp luật" tail; each question is a 5-word slice of one
    article followed by "quy định", so lexical retrieval can always find it.
    """

    def _make(n_laws: int = 2, articles_per_law: int = 3, n_questions: int = 20,
              words: int = 40, seed: int = 42):
        rng = np.random.default_rng(seed)
        articles = []
        for law in range(n_laws):
            law_id = f"{law + 1:02d}/2020/QH14"
            for a in range(articles_per_law):
                idx = law * articles_per_law + a
                text = " ".join(f"k{idx}t{j}" for j in range(words)) + " quy định pháp luật"
                articles.append(Article(law_id, str(a + 1), text))

        questions = []
        for q in range(n_questions):
            article = articles[int(rng.integers(0, len(articles)))]
            start = int(rng.integers(0, words - 5))
            text = " ".join(article.text.split()[start:start + 5]) + " quy định"
            questions.append(Question(f"q{q:03d}", text, frozenset({article.key})))
        return articles, questions

    return _make


@pytest.fixture
def dataset_files(tmpdir_path, legal_dataset):
    """Write the default synthetic dataset; returns ``(corpus_path, questions_path)``."""
    articles, questions = legal_dataset()
    corpus_path = os.path.join(tmpdir_path, "corpus.json")
    questions_path = os.path.join(tmpdir_path, "questions.json")
    write_corpus(corpus_path, articles)
    write_questions(questions_path, questions)
    return corpus_path, questions_path


@pytest.fixture
def constant_scorer_command():
    """Command line of the reference external scorer, run with this interpreter."""

    def _make(*extra: str):
        return [sys.executable, os.path.join(SCRIPTS_DIR, "constant_scorer.py"), *extra]

    return _make


# Perplexity column of a published in-domain selection example; sentences are
# stand-ins, only the scores matter for the keep/drop partition.
SCORED_ROWS = [
    ("Tòa án nhân dân tối cao hướng dẫn áp dụng thống nhất pháp luật", 35.01),
    ("Người bị tạm giữ có quyền được biết lý do mình bị tạm giữ", 87.62),
    ("Hội đồng xét xử phải tuyên án đúng quy định", 99.30),
    ("Cơ quan điều tra có trách nhiệm thông báo cho người bào chữa", 152.27),
    ("Giá vàng hôm nay tăng nhẹ ở cả hai chiều mua bán", 277.18),
    ("Đội tuyển giành chiến thắng thuyết phục trong trận chung kết", 404.96),
    ("Món phở bò nổi tiếng với nước dùng thơm ngon", 1322.54),
    ("Ca sĩ trẻ tung ra bản hit mới vào cuối tuần", 3383.04),
]


@pytest.fixture
def scored_rows():
    return list(SCORED_ROWS)


@pytest.fixture
def scored_tsv(tmpdir_path):
    """The scored rows written as ``score<TAB>sentence`` lines."""
    path = os.path.join(tmpdir_path, "scored.tsv")
    with open(path, "w", encoding="utf-8") as f:
        for sentence, score in SCORED_ROWS:
            f.write(f"{score:.2f}\t{sentence}\n")
    return path
