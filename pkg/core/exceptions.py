"""Custom exceptions for the retrieval toolkit.

All exceptions inherit from :class:`ToolkitError` so callers can catch
the entire family with a single ``except ToolkitError`` clause.
"""

from typing import Iterable, Optional, Sequence, Tuple


class ToolkitError(Exception):
    """Base exception for every toolkit package."""


class ConfigError(ToolkitError):
    """Raised when a run configuration is invalid or references missing paths."""


# ── text ────────────────────────────────────────────────────────────


class TextDecodeError(ToolkitError):
    """Raised when raw input bytes are not valid UTF-8.

    Attributes:
        byte_offset: Offset of the first undecodable byte.
    """

    def __init__(self, message: str, byte_offset: int = -1) -> None:
        super().__init__(message)
        self.byte_offset = byte_offset


# ── index ───────────────────────────────────────────────────────────


class IndexBuildError(ToolkitError):
    """Raised when a BM25 index cannot be built (empty corpus, duplicate ids)."""


class UnknownDocumentError(ToolkitError):
    """Raised when a document id is not present in an index."""


class IndexFormatError(ToolkitError):
    """Raised when a persisted index has a missing or incompatible header."""


# ── segmentation ────────────────────────────────────────────────────


class SegmentationError(ToolkitError):
    """Raised on invalid window/stride settings or empty passage lists."""


# ── data ────────────────────────────────────────────────────────────


class DataLoadError(ToolkitError):
    """Raised when a corpus or question file cannot be parsed.

    Attributes:
        record_index: Index of the offending record, ``-1`` for file-level errors.
        field: Name of the offending field, empty for file-level errors.
    """

    def __init__(self, message: str, record_index: int = -1, field: str = "") -> None:
        super().__init__(message)
        self.record_index = record_index
        self.field = field


class DanglingReferenceError(DataLoadError):
    """Raised when questions cite articles that are not in the corpus.

    Attributes:
        offenders: ``(question_id, law_id, article_id)`` triples.
    """

    def __init__(self, message: str, offenders: Iterable[Tuple[str, str, str]] = ()) -> None:
        super().__init__(message)
        self.offenders: Sequence[Tuple[str, str, str]] = tuple(offenders)


class SplitError(ToolkitError):
    """Raised when a dev split cannot be formed."""


# ── language model ──────────────────────────────────────────────────


class LanguageModelError(ToolkitError):
    """Raised on invalid LM training input or parameters."""


class ModelFormatError(LanguageModelError):
    """Raised when a persisted language model has an incompatible header."""


# ── scoring ─────────────────────────────────────────────────────────


class ScorerError(ToolkitError):
    """Base for pair-scorer failures.

    Attributes:
        pair_id: The request the failure is attributed to, if known.
    """

    def __init__(self, message: str, pair_id: Optional[str] = None) -> None:
        super().__init__(message)
        self.pair_id = pair_id


class ScorerProtocolError(ScorerError):
    """Raised when an external scorer emits a malformed or mismatched line."""


class ScorerTimeoutError(ScorerError):
    """Raised when an external scorer does not answer within the batch timeout."""


class ScorerCrashedError(ScorerError):
    """Raised when an external scorer exits or closes its output early."""


# ── pipeline / evaluation ───────────────────────────────────────────


class VoteError(ToolkitError):
    """Raised when runs cannot be combined (mismatched questions, bad weights)."""


class EvaluationError(ToolkitError):
    """Raised when a run cannot be evaluated against the gold questions."""


# ── monitoring ──────────────────────────────────────────────────────


class MonitoringError(ToolkitError):
    """Base for run-summary and event-log errors."""


class MetricsWriteError(MonitoringError):
    """Raised when writing an event or summary file fails."""


class MetricsReadError(MonitoringError):
    """Raised when reading the JSONL event log fails."""


# ── benchmarks ──────────────────────────────────────────────────────


class BenchmarkError(ToolkitError):
    """Base for benchmark-specific errors."""


class BenchmarkSetupError(BenchmarkError):
    """Raised when synthetic benchmark data cannot be created."""


class BenchmarkRunError(BenchmarkError):
    """Raised when a benchmark function fails during execution."""
