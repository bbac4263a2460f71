"""Corpus ingestion, normalization, pre-tokenization, and dataset extraction.

The evaluation dataset format is whitespace-separated tokens with inline
marker tokens; markers are dropped and the surviving words keep their counts.
Pre-tokenization is lossless: the word list plus the recorded delimiter runs
always reconstruct the input exactly.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import regex as _regex

from .errors import DataError

TSHEG = "་"

# Marker tokens dropped from the evaluation dataset (exact full-token matches).
MARKER_TOKENS = frozenset({"beg", "end", "mid", "#", "*", "NUM"})

PRETOKEN_MODES = ("whitespace", "tsheg_syllable", "byte_level_regex")

# De-facto standard byte-level pre-tokenization pattern (spaces attach to the
# following word; contractions and digit/punctuation runs split off).
BYTE_LEVEL_PATTERN = (
    r"'s|'t|'re|'ve|'m|'ll|'d"
    r"| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"
)
_BYTE_LEVEL_RE = _regex.compile(BYTE_LEVEL_PATTERN)

# ASCII whitespace only; the dataset layout predates Unicode space variants.
_ASCII_WS_RE = re.compile(r"[ \t\n\r\x0b\x0c]+")


@dataclass(frozen=True)
class PretokenPolicy:
    """How text is split into words before training/encoding/metrics."""

    mode: str = "whitespace"
    normalization: str = "NFC"
    lowercase: bool = False

    def __post_init__(self) -> None:
        if self.mode not in PRETOKEN_MODES:
            raise DataError(f"unknown pre-tokenization mode: {self.mode!r}")
        if self.normalization not in ("NFC", "none"):
            raise DataError(f"unknown normalization: {self.normalization!r}")

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "normalization": self.normalization,
            "lowercase": self.lowercase,
        }


@dataclass
class Corpus:
    """Newline-delimited text plus bookkeeping for exact re-serialization."""

    documents: list[str]
    char_count: int
    source_id: str
    trailing_newline: bool = True


@dataclass
class WordCounts:
    """Multiset of words; insertion order of `entries` is first-seen order."""

    entries: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for word, count in self.entries.items():
            if not word:
                raise DataError("empty string cannot be a word key")
            if count < 1:
                raise DataError(f"word count must be >= 1, got {word!r}: {count}")

    @property
    def total_words(self) -> int:
        return sum(self.entries.values())

    @property
    def distinct_words(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def normalize(text: str, policy: PretokenPolicy) -> str:
    """Apply the policy's normalization stage (NFC and/or lowercasing)."""
    if policy.normalization == "NFC":
        text = unicodedata.normalize("NFC", text)
    if policy.lowercase:
        text = text.lower()
    return text


def load_corpus(path: str | Path, policy: PretokenPolicy) -> Corpus:
    """Read a UTF-8 corpus file, one document per line.

    char_count counts Unicode scalars over documents; the line delimiters
    themselves are not counted. Invalid UTF-8 reports the byte offset.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(
            f"corpus {path} is not valid UTF-8 at byte offset {exc.start}"
        ) from exc
    text = normalize(text, policy)
    documents = text.split("\n")
    trailing_newline = len(documents) > 1 and documents[-1] == ""
    if documents and documents[-1] == "":
        documents.pop()
    return Corpus(
        documents=documents,
        char_count=sum(len(doc) for doc in documents),
        source_id=str(path),
        trailing_newline=trailing_newline,
    )


def serialize_corpus(corpus: Corpus) -> str:
    """Inverse of load_corpus for normalization=none inputs."""
    body = "\n".join(corpus.documents)
    return body + "\n" if corpus.trailing_newline and corpus.documents else body


def split_with_delims(text: str, policy: PretokenPolicy) -> tuple[list[str], list[str]]:
    """Lossless split: returns (words, delims) with len(delims) = len(words)+1.

    delims[i] precedes words[i]; delims[-1] trails the final word, so
    interleaving delims and words reproduces the input exactly. In
    byte_level_regex mode the pattern partitions the text and every delimiter
    is empty (whitespace stays attached to the pre-tokens).
    """
    if policy.mode == "byte_level_regex":
        tokens = _BYTE_LEVEL_RE.findall(text)
        return tokens, [""] * (len(tokens) + 1)

    words: list[str] = []
    delims: list[str] = [""]
    word: list[str] = []
    tsheg_mode = policy.mode == "tsheg_syllable"
    for ch in text:
        if ch.isspace():
            if word:
                words.append("".join(word))
                word.clear()
                delims.append(ch)
            else:
                delims[-1] += ch
        else:
            word.append(ch)
            if tsheg_mode and ch == TSHEG:
                words.append("".join(word))
                word.clear()
                delims.append("")
    if word:
        words.append("".join(word))
        delims.append("")
    return words, delims


def pretokenize(text: str, policy: PretokenPolicy) -> list[str]:
    """Split text into words per policy (delimiters dropped)."""
    return split_with_delims(text, policy)[0]


def extract_words(dataset_tokens: list[str]) -> WordCounts:
    """Drop marker tokens, count the remaining words in first-seen order."""
    entries: dict[str, int] = {}
    for token in dataset_tokens:
        if token in MARKER_TOKENS:
            continue
        entries[token] = entries.get(token, 0) + 1
    return WordCounts(entries)


def count_words(corpus_or_text: Corpus | str, policy: PretokenPolicy) -> WordCounts:
    """Pre-tokenize a corpus (or raw text) and tally word frequencies."""
    if isinstance(corpus_or_text, Corpus):
        documents = corpus_or_text.documents
    else:
        documents = [normalize(corpus_or_text, policy)]
    entries: dict[str, int] = {}
    for doc in documents:
        for word in pretokenize(doc, policy):
            entries[word] = entries.get(word, 0) + 1
    return WordCounts(entries)


def concat_words(wc: WordCounts) -> str:
    """Join every word (repeated per count, first-seen order) with single spaces."""
    parts: list[str] = []
    for word, count in wc.entries.items():
        parts.extend([word] * count)
    return " ".join(parts)


def expand_words(wc: WordCounts) -> list[str]:
    """The word sequence underlying concat_words, as a list."""
    out: list[str] = []
    for word, count in wc.entries.items():
        out.extend([word] * count)
    return out


def load_dataset(path: str | Path) -> list[str]:
    """Read the marker-annotated dataset: ASCII-whitespace-separated tokens."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(
            f"dataset {path} is not valid UTF-8 at byte offset {exc.start}"
        ) from exc
    return [tok for tok in _ASCII_WS_RE.split(text) if tok]


def dedupe(wc: WordCounts) -> WordCounts:
    """Collapse all counts to 1 (the --dedupe switch)."""
    return WordCounts({word: 1 for word in wc.entries})
