"""
Legal Retrieval Toolkit — Central Configuration
================================================
All tunable parameters live here instead of at the top of each module.
A JSON config file overrides the defaults, command-line flags override the
file. The only environment variable read is RETRIEVAL_OUTPUT_DIR.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, get_type_hints

from core.bm25_index import Bm25Params
from core.exceptions import ConfigError
from core.rerank_pipeline import RETRIEVAL_UNITS, SELECTION_KINDS, PipelineConfig, SelectionPolicy
from core.segmenter import SegmentationConfig
from core.text_normalizer import CompoundTokenizer, NormalizationConfig, TextPipeline, load_compound_dict
from ml.indomain_selector import SelectionConfig

RESOURCE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "resources")

# fields naming files that must exist whenever they are set
INPUT_PATH_FIELDS = (
    "corpus_path",
    "questions_path",
    "stopwords_path",
    "compounds_path",
    "accent_map_path",
    "abbreviation_map_path",
)

# fields that do not change any primary output
_UNHASHED_FIELDS = ("output_dir", "workers")


@dataclass
class RunConfig:
    """Toolkit-wide run configuration"""

    # ================================================================
    # Paths
    # ================================================================
    corpus_path: str = ""
    questions_path: str = ""
    stopwords_path: str = os.path.join(RESOURCE_DIR, "stopwords_vi.txt")
    compounds_path: str = os.path.join(RESOURCE_DIR, "compounds_vi.txt")
    accent_map_path: str = os.path.join(RESOURCE_DIR, "accent_map.tsv")
    abbreviation_map_path: str = os.path.join(RESOURCE_DIR, "abbreviations.tsv")
    index_path: str = ""
    lm_path: str = ""
    output_dir: str = field(
        default_factory=lambda: os.environ.get("RETRIEVAL_OUTPUT_DIR", "./output")
    )

    @property
    def log_dir(self) -> str:
        return os.path.join(self.output_dir, "logs")

    # ================================================================
    # Text normalization (retrieval side)
    # ================================================================
    lowercase: bool = True
    strip_punctuation: bool = True
    remove_stopwords: bool = True

    # ================================================================
    # Text normalization (LM side; stopwords are kept for fluency)
    # ================================================================
    lm_lowercase: bool = True
    lm_remove_stopwords: bool = False
    vietnamese_min_ratio: float = 0.9

    # ================================================================
    # BM25
    # ================================================================
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    # ================================================================
    # Segmentation
    # ================================================================
    window: int = 200
    stride: int = 100

    # ================================================================
    # Pair generation
    # ================================================================
    pair_k: int = 150
    pair_k_by_source: Dict[str, int] = field(
        default_factory=lambda: {"official": 150, "zalo": 20}
    )
    max_question_tokens: int = 128
    dev_fraction: float = 0.2
    shuffle_train: bool = False

    # ================================================================
    # QA filtering
    # ================================================================
    max_answer_words: int = 50
    qa_dev_fraction: float = 0.15

    # ================================================================
    # Language model
    # ================================================================
    lm_order: int = 3
    lm_discount: float = 0.75
    lm_unk_threshold: int = 2

    # ================================================================
    # In-domain selection
    # ================================================================
    ppl_threshold: float = 200.0
    ppl_min_threshold: Optional[float] = None
    ppl_batch_size: int = 1000

    # ================================================================
    # Rerank pipeline
    # ================================================================
    k_retrieve: int = 150
    retrieval_unit: str = "article"
    scorer: str = "builtin"                  # builtin | external
    scorer_command: List[str] = field(default_factory=list)
    scorer_timeout: float = 60.0             # seconds per batch
    selection: str = "top1"                  # top1 | threshold
    tau: float = 0.5

    # ================================================================
    # Evaluation
    # ================================================================
    beta: float = 2.0

    # ================================================================
    # Runtime
    # ================================================================
    seed: int = 42
    workers: int = 0                         # <= 0: all cores

    # ================================================================
    # Loading
    # ================================================================

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        """Defaults overlaid with a JSON object; unknown keys and missing input files are errors."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"Cannot read config {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a JSON object")

        config = cls()
        config.apply_overrides(payload)
        config.check_paths()
        return config

    def apply_overrides(self, overrides: Mapping[str, Any]) -> None:
        """Set fields from a mapping; ``None`` values are skipped (flag not given)."""
        hints = get_type_hints(type(self))
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"Unknown config key(s): {', '.join(unknown)}")
        for key, value in overrides.items():
            if value is None:
                continue
            setattr(self, key, _coerce(key, value, hints[key]))

    def check_paths(self) -> None:
        missing = [
            f"{name}={getattr(self, name)}"
            for name in INPUT_PATH_FIELDS
            if getattr(self, name) and not os.path.exists(getattr(self, name))
        ]
        if missing:
            raise ConfigError(f"Configured path(s) do not exist: {', '.join(missing)}")

    def validate(self) -> None:
        """Check every module invariant; raises ConfigError on the first violation."""
        checks = [
            (self.bm25_k1 > 0, f"bm25_k1 must be > 0, got {self.bm25_k1}"),
            (0.0 <= self.bm25_b <= 1.0, f"bm25_b must be in [0, 1], got {self.bm25_b}"),
            (1 <= self.stride <= self.window, f"need 1 <= stride <= window, got {self.stride}/{self.window}"),
            (self.pair_k >= 1, f"pair_k must be >= 1, got {self.pair_k}"),
            (all(k >= 1 for k in self.pair_k_by_source.values()), "pair_k_by_source values must be >= 1"),
            (self.max_question_tokens >= 1, "max_question_tokens must be >= 1"),
            (0.0 < self.dev_fraction < 1.0, f"dev_fraction must be in (0, 1), got {self.dev_fraction}"),
            (0.0 < self.qa_dev_fraction < 1.0, f"qa_dev_fraction must be in (0, 1), got {self.qa_dev_fraction}"),
            (self.max_answer_words >= 1, "max_answer_words must be >= 1"),
            (self.lm_order >= 1, f"lm_order must be >= 1, got {self.lm_order}"),
            (0.0 < self.lm_discount < 1.0, f"lm_discount must be in (0, 1), got {self.lm_discount}"),
            (self.lm_unk_threshold >= 1, "lm_unk_threshold must be >= 1"),
            (0.0 < self.vietnamese_min_ratio <= 1.0, "vietnamese_min_ratio must be in (0, 1]"),
            (self.ppl_threshold > 0, f"ppl_threshold must be > 0, got {self.ppl_threshold}"),
            (
                self.ppl_min_threshold is None or 0 <= self.ppl_min_threshold <= self.ppl_threshold,
                "ppl_min_threshold must be in [0, ppl_threshold]",
            ),
            (self.ppl_batch_size >= 1, "ppl_batch_size must be >= 1"),
            (self.k_retrieve >= 1, f"k_retrieve must be >= 1, got {self.k_retrieve}"),
            (self.retrieval_unit in RETRIEVAL_UNITS, f"retrieval_unit must be one of {RETRIEVAL_UNITS}"),
            (self.scorer in ("builtin", "external"), f"scorer must be builtin or external, got {self.scorer!r}"),
            (self.scorer != "external" or bool(self.scorer_command), "scorer=external needs scorer_command"),
            (self.scorer_timeout > 0, "scorer_timeout must be > 0"),
            (self.selection in SELECTION_KINDS, f"selection must be one of {SELECTION_KINDS}"),
            (0.0 <= self.tau <= 1.0, f"tau must be in [0, 1], got {self.tau}"),
            (self.beta > 0, f"beta must be > 0, got {self.beta}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    # ================================================================
    # Echo
    # ================================================================

    def effective_dict(self) -> Dict[str, Any]:
        return dict(sorted(asdict(self).items()))

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.effective_dict().items() if k not in _UNHASHED_FIELDS}
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def ensure_directories(self) -> None:
        os.makedirs(self.output_dir, exist_ok=True)
        os.makedirs(self.log_dir, exist_ok=True)

    @property
    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    # ================================================================
    # Module configs
    # ================================================================

    def normalization_config(self) -> NormalizationConfig:
        return NormalizationConfig.from_paths(
            self.stopwords_path or None,
            self.accent_map_path or None,
            self.abbreviation_map_path or None,
            lowercase=self.lowercase,
            strip_punctuation=self.strip_punctuation,
            remove_stopwords=self.remove_stopwords,
        )

    def lm_normalization_config(self) -> NormalizationConfig:
        return NormalizationConfig.from_paths(
            self.stopwords_path or None,
            self.accent_map_path or None,
            self.abbreviation_map_path or None,
            lowercase=self.lm_lowercase,
            strip_punctuation=True,
            remove_stopwords=self.lm_remove_stopwords,
        )

    def _tokenizer(self) -> CompoundTokenizer:
        compounds = load_compound_dict(self.compounds_path) if self.compounds_path else frozenset()
        return CompoundTokenizer(compounds)

    def text_pipeline(self) -> TextPipeline:
        return TextPipeline(self.normalization_config(), self._tokenizer())

    def lm_pipeline(self) -> TextPipeline:
        return TextPipeline(self.lm_normalization_config(), self._tokenizer())

    def bm25_params(self) -> Bm25Params:
        return Bm25Params(self.bm25_k1, self.bm25_b)

    def segmentation(self) -> SegmentationConfig:
        return SegmentationConfig(self.window, self.stride)

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(self.ppl_threshold, self.ppl_min_threshold)

    def selection_policy(self) -> SelectionPolicy:
        return SelectionPolicy(self.selection, self.tau)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            k_retrieve=self.k_retrieve,
            seg=self.segmentation(),
            policy=self.selection_policy(),
            retrieval_unit=self.retrieval_unit,
            workers=self.resolved_workers,
        )


def _coerce(name: str, value: Any, hint: Any) -> Any:
    """Check a config value against its field type; ints are accepted for floats."""
    origin = getattr(hint, "__origin__", None)
    args = getattr(hint, "__args__", ())
    if origin is not None and type(None) in args:  # Optional[X]
        hint = next(a for a in args if a is not type(None))
        origin = getattr(hint, "__origin__", None)

    if hint is bool:
        ok = isinstance(value, bool)
    elif hint is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif hint is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif hint is str:
        ok = isinstance(value, str)
    elif origin is list:
        ok = isinstance(value, list) and all(isinstance(v, str) for v in value)
    elif origin is dict:
        ok = isinstance(value, dict) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value.values()
        )
    else:
        ok = True
    if not ok:
        raise ConfigError(f"Config key {name!r} has the wrong type: {value!r}")
    return value
