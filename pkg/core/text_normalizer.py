"""
Text Normalizer — text cleanup and tokenization
================================================

Deterministic preprocessing applied before indexing, segmentation and
language-model training:
- canonical Unicode composition (charset standardization)
- abbreviation expansion (HĐXX → hội đồng xét xử)
- accent placement standardization (oà → òa)
- lowercase / punctuation strip / stopword removal, each behind a flag
- dictionary-based compound joining (hội đồng → hội_đồng)

Everything here is a pure function over an immutable config, so any number
of threads may call it concurrently.
"""

import logging
import re
import string
import unicodedata
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Protocol,
    Tuple,
    Union,
)

from core.exceptions import DataLoadError, TextDecodeError

logger = logging.getLogger(__name__)

COMPOUND_JOINER = "_"

# letter or digit, excluding the underscore that \w also admits
_ALNUM = r"[^\W_]"
_SENTENCE_BREAK = re.compile(r"(?<=[.!?;…])\s+|\n+")
_MAX_PASSES = 4

_BASE_VOWELS = "aăâeêioôơuưy"
_TONE_MARKS = "\u0300\u0301\u0303\u0309\u0323"
VIETNAMESE_SPECIFIC: FrozenSet[str] = frozenset("đăâêôơư") | frozenset(
    unicodedata.normalize("NFC", v + t) for v in _BASE_VOWELS for t in _TONE_MARKS
)
VIETNAMESE_LETTERS: FrozenSet[str] = frozenset(string.ascii_lowercase) | VIETNAMESE_SPECIFIC


# ================================================================
# Config
# ================================================================


def _alternation(keys: Iterable[str]) -> str:
    # longest key first so the regex engine prefers it at each position
    ordered = sorted(keys, key=lambda k: (-len(k), k))
    return "|".join(re.escape(k) for k in ordered)


@dataclass(frozen=True)
class NormalizationConfig:
    """Flags and lookup tables that fully determine :func:`normalize` output."""

    lowercase: bool = True
    strip_punctuation: bool = True
    remove_stopwords: bool = False
    stopword_list: FrozenSet[str] = frozenset()
    accent_map: Mapping[str, str] = field(default_factory=dict)
    abbreviation_map: Mapping[str, str] = field(default_factory=dict)
    unicode_form: str = "NFC"

    _accent_re: Optional[re.Pattern] = field(default=None, init=False, repr=False, compare=False)
    _abbrev_re: Optional[re.Pattern] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.unicode_form not in ("NFC", "NFKC", "NFD", "NFKD"):
            raise ValueError(f"Unknown unicode form: {self.unicode_form}")
        for name, table in (("accent_map", self.accent_map), ("abbreviation_map", self.abbreviation_map)):
            for key in table:
                if not key:
                    raise ValueError(f"{name} contains an empty key")

        compose = lambda s: unicodedata.normalize(self.unicode_form, s)  # noqa: E731
        accent = {compose(k): compose(v) for k, v in self.accent_map.items()}
        abbrev = {compose(k): compose(v) for k, v in self.abbreviation_map.items()}
        object.__setattr__(self, "accent_map", accent)
        object.__setattr__(self, "abbreviation_map", abbrev)
        object.__setattr__(self, "stopword_list", frozenset(compose(w) for w in self.stopword_list))

        if accent:
            object.__setattr__(
                self, "_accent_re",
                re.compile(f"(?:{_alternation(accent)})(?!{_ALNUM})"),
            )
        if abbrev:
            object.__setattr__(
                self, "_abbrev_re",
                re.compile(f"(?<!{_ALNUM})(?:{_alternation(abbrev)})(?!{_ALNUM})"),
            )

    @classmethod
    def from_paths(
        cls,
        stopwords_path: Optional[str] = None,
        accent_map_path: Optional[str] = None,
        abbreviation_map_path: Optional[str] = None,
        **flags,
    ) -> "NormalizationConfig":
        """Build a config from the newline/TAB-delimited resource files."""
        return cls(
            stopword_list=load_word_list(stopwords_path) if stopwords_path else frozenset(),
            accent_map=load_tsv_map(accent_map_path) if accent_map_path else {},
            abbreviation_map=load_tsv_map(abbreviation_map_path) if abbreviation_map_path else {},
            **flags,
        )


# ================================================================
# Resource files
# ================================================================


def _read_lines(path: str) -> Iterator[Tuple[int, str]]:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise DataLoadError(f"Cannot read {path}: {exc}") from exc
    text = decode_text(raw)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def load_word_list(path: str) -> FrozenSet[str]:
    """Load a newline-delimited word list (stopwords). Multiword entries are joined with ``_``."""
    words = frozenset(
        COMPOUND_JOINER.join(line.split())
        for _, line in _read_lines(path)
    )
    logger.debug(f"Loaded {len(words)} entries from {path}")
    return words


def load_compound_dict(path: str) -> FrozenSet[str]:
    """Load a compound dictionary, one space- or underscore-separated entry per line."""
    entries = frozenset(
        " ".join(line.replace(COMPOUND_JOINER, " ").split())
        for _, line in _read_lines(path)
    )
    logger.debug(f"Loaded {len(entries)} compounds from {path}")
    return entries


def load_tsv_map(path: str) -> Dict[str, str]:
    """Load a ``key<TAB>value`` map file."""
    table: Dict[str, str] = {}
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise DataLoadError(
                f"{path}:{lineno}: expected 'key<TAB>value'", record_index=lineno, field="key"
            )
        table[parts[0].strip()] = parts[1].strip()
    return table


# ================================================================
# Normalization
# ================================================================


def decode_text(raw: bytes) -> str:
    """Decode UTF-8 bytes, reporting the first bad byte offset on failure."""
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TextDecodeError(
            f"Invalid UTF-8 at byte offset {exc.start}", byte_offset=exc.start
        ) from exc


def _check_encodable(text: str) -> None:
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        offset = len(text[: exc.start].encode("utf-8", "surrogatepass"))
        raise TextDecodeError(
            f"Unpaired surrogate at byte offset {offset}", byte_offset=offset
        ) from exc


def _strip_punctuation(text: str) -> str:
    return "".join(
        " " if unicodedata.category(ch)[0] in "PS" else ch
        for ch in text
    )


def _normalize_once(text: str, cfg: NormalizationConfig) -> str:
    text = unicodedata.normalize(cfg.unicode_form, text)
    if cfg._abbrev_re is not None:
        text = cfg._abbrev_re.sub(lambda m: cfg.abbreviation_map[m.group(0)], text)
    if cfg.lowercase:
        text = text.lower()
    if cfg.strip_punctuation:
        text = _strip_punctuation(text)
    text = " ".join(text.split())
    if cfg._accent_re is not None:
        text = cfg._accent_re.sub(lambda m: cfg.accent_map[m.group(0)], text)
    if cfg.remove_stopwords and cfg.stopword_list:
        text = " ".join(w for w in text.split() if w not in cfg.stopword_list)
    return unicodedata.normalize(cfg.unicode_form, text)


def normalize(raw: Union[str, bytes], cfg: NormalizationConfig) -> str:
    """
    Normalize raw text per ``cfg``; idempotent for every config.

    One pass runs: compose → expand abbreviations → lowercase → strip
    punctuation → collapse whitespace → standardize accents → drop stopwords
    → compose. Passes repeat until the text is stable, since stripping can
    expose a multiword key that the previous pass could not see.
    """
    text = decode_text(raw) if isinstance(raw, (bytes, bytearray)) else raw
    _check_encodable(text)
    for _ in range(_MAX_PASSES):
        if not text:
            return ""
        updated = _normalize_once(text, cfg)
        if updated == text:
            break
        text = updated
    return text


# ================================================================
# Tokenization
# ================================================================


@dataclass(frozen=True)
class TokenSeq(Sequence):
    """Ordered tokens with ``(byte_start, byte_end)`` spans into the normalized text."""

    tokens: Tuple[str, ...] = ()
    spans: Tuple[Tuple[int, int], ...] = ()
    # normalized text the spans point into; empty when built from bare tokens
    source: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(tuple(s) for s in self.spans))
        if len(self.tokens) != len(self.spans):
            raise ValueError("tokens and spans differ in length")
        prev_end = 0
        for tok, (start, end) in zip(self.tokens, self.spans):
            if not tok:
                raise ValueError("empty token")
            if start < prev_end or end <= start:
                raise ValueError(f"span ({start}, {end}) overlaps or is empty")
            prev_end = end

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "TokenSeq":
        """Build a sequence whose spans assume the tokens were joined by single spaces."""
        toks = tuple(tokens)
        spans = []
        pos = 0
        for tok in toks:
            n = len(tok.encode("utf-8"))
            spans.append((pos, pos + n))
            pos += n + 1
        return cls(toks, tuple(spans))

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return TokenSeq(self.tokens[item], self.spans[item], self.source)
        return self.tokens[item]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def surface(self) -> str:
        """Normalized text from the first to the last token, dropped words and unjoined compounds included."""
        if not self.source or not self.tokens:
            return self.text
        return self.source.encode("utf-8")[self.spans[0][0]:self.spans[-1][1]].decode("utf-8")


def as_token_seq(tokens: Union[TokenSeq, Iterable[str]]) -> TokenSeq:
    if isinstance(tokens, TokenSeq):
        return tokens
    return TokenSeq.from_tokens(tokens)


class Tokenizer(Protocol):
    """Anything that turns normalized text into a :class:`TokenSeq`."""

    def tokenize(self, normalized: str) -> TokenSeq:
        ...


class CompoundTokenizer:
    """Whitespace syllable split with greedy longest-match compound joining."""

    def __init__(self, compounds: Iterable[str] = ()):
        self._entries = frozenset(
            tuple(c.replace(COMPOUND_JOINER, " ").split()) for c in compounds
        )
        self._entries = frozenset(e for e in self._entries if len(e) >= 2)
        self._max_len = max((len(e) for e in self._entries), default=1)

    def tokenize(self, normalized: str) -> TokenSeq:
        syllables: List[str] = []
        spans: List[Tuple[int, int]] = []
        byte_pos = 0
        char_pos = 0
        for m in re.finditer(r"\S+", normalized):
            byte_pos += len(normalized[char_pos:m.start()].encode("utf-8"))
            width = len(m.group(0).encode("utf-8"))
            syllables.append(m.group(0))
            spans.append((byte_pos, byte_pos + width))
            byte_pos += width
            char_pos = m.end()

        tokens: List[str] = []
        token_spans: List[Tuple[int, int]] = []
        i, n = 0, len(syllables)
        while i < n:
            length = 1
            for size in range(min(self._max_len, n - i), 1, -1):
                if tuple(syllables[i:i + size]) in self._entries:
                    length = size
                    break
            tokens.append(COMPOUND_JOINER.join(syllables[i:i + length]))
            token_spans.append((spans[i][0], spans[i + length - 1][1]))
            i += length
        return TokenSeq(tuple(tokens), tuple(token_spans), normalized)


def tokenize(normalized: str, compound_dict: Iterable[str] = ()) -> TokenSeq:
    """Tokenize normalized text, joining dictionary compounds with ``_``."""
    return CompoundTokenizer(compound_dict).tokenize(normalized)


def remove_stopwords(seq: Union[TokenSeq, Iterable[str]], stopwords: Iterable[str]) -> TokenSeq:
    """Order-preserving filter dropping every member of ``stopwords``."""
    seq = as_token_seq(seq)
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    if not stop:
        return seq
    kept = [(t, s) for t, s in zip(seq.tokens, seq.spans) if t not in stop]
    return TokenSeq(tuple(t for t, _ in kept), tuple(s for _, s in kept), seq.source)


@dataclass(frozen=True, eq=False)
class TextPipeline:
    """
    normalize → tokenize → token-level stopword pass, as one callable.

    Normalization keeps stopwords so multiword compounds can still form;
    they are dropped token by token afterwards, so ``như_thế_nào`` goes as one token.
    """

    config: NormalizationConfig = field(default_factory=NormalizationConfig)
    tokenizer: Tokenizer = field(default_factory=CompoundTokenizer)
    _text_config: NormalizationConfig = field(init=False, repr=False)

    def __post_init__(self):
        text_config = self.config
        if self.config.remove_stopwords:
            text_config = replace(self.config, remove_stopwords=False)
        object.__setattr__(self, "_text_config", text_config)

    def process(self, raw: Union[str, bytes]) -> TokenSeq:
        seq = self.tokenizer.tokenize(normalize(raw, self._text_config))
        if self.config.remove_stopwords and self.config.stopword_list:
            seq = remove_stopwords(seq, self.config.stopword_list)
        return seq

    __call__ = process


# ================================================================
# Sentence utilities (LM corpus preparation)
# ================================================================


def split_sentences(text: str) -> List[str]:
    """Split raw text on sentence-final punctuation and line breaks."""
    return [s.strip() for s in _SENTENCE_BREAK.split(text) if s and s.strip()]


def is_vietnamese(sentence: str, min_ratio: float = 0.9) -> bool:
    """True when most letters are Vietnamese-alphabet letters and at least one is Vietnamese-specific."""
    letters = [c.lower() for c in unicodedata.normalize("NFC", sentence) if c.isalpha()]
    if not letters:
        return False
    inside = sum(1 for c in letters if c in VIETNAMESE_LETTERS)
    if inside / len(letters) < min_ratio:
        return False
    return any(c in VIETNAMESE_SPECIFIC for c in letters)


def clean_sentences(sentences: Iterable[str], min_ratio: float = 0.9) -> Iterator[str]:
    """Stream sentences with duplicates and non-Vietnamese lines removed."""
    seen = set()
    dropped_dup = dropped_lang = 0
    for sentence in sentences:
        key = " ".join(sentence.split())
        if not key:
            continue
        if key in seen:
            dropped_dup += 1
            continue
        seen.add(key)
        if not is_vietnamese(key, min_ratio):
            dropped_lang += 1
            continue
        yield key
    logger.info(
        f"Sentence cleaning: kept {len(seen) - dropped_lang}, "
        f"dropped {dropped_dup} duplicates and {dropped_lang} non-Vietnamese"
    )
