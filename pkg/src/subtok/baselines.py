"""Loaders for pretrained tokenizer formats used as comparison baselines.

Supported kinds:
  vocab_merges_bpe  directory with vocab.json (piece -> id) and merges.txt,
                    byte-level BPE over the printable byte alphabet
  rank_file_bpe     one "base64(token_bytes) rank" pair per line, greedy
                    lowest-rank byte-pair merging
  unigram_tsv       "piece<TAB>log_prob" table with a "#! unigram v1" header
  pure_byte         no file; every UTF-8 byte is one token (ids 0..255)

All byte-level kinds accept arbitrary UTF-8 input.
"""

from __future__ import annotations

import base64
import binascii
import json
from pathlib import Path
from typing import Callable

from .bpe import BYTE_TO_CHAR, apply_merges
from .corpus import PretokenPolicy
from .errors import DataError
from .tokens import TokenSeq, byte_token, encode_with_policy
from .unigram import encode_word_unigram, load_unigram

BASELINE_KINDS = ("vocab_merges_bpe", "rank_file_bpe", "unigram_tsv", "pure_byte")


class BaselineTokenizer:
    """Word-level encoder facade shared by every baseline kind."""

    def __init__(
        self,
        kind: str,
        name: str,
        vocab_size: int,
        encode_word_fn: Callable[[str], tuple[list[int], list[str]]],
    ):
        self.kind = kind
        self.name = name
        self._vocab_size = vocab_size
        self._encode_word = encode_word_fn

    def vocab_size(self) -> int:
        return self._vocab_size

    def encode_word(self, word: str) -> tuple[list[int], list[str]]:
        return self._encode_word(word)

    def encode(
        self, text: str, policy: PretokenPolicy, keep_delims: bool = False
    ) -> TokenSeq:
        return encode_with_policy(self._encode_word, text, policy, keep_delims)


def load_vocab_merges(vocab_path: str | Path, merges_path: str | Path) -> BaselineTokenizer:
    """Byte-level BPE from a piece->id JSON object plus a ranked merges file."""
    vocab_file = Path(vocab_path)
    merges_file = Path(merges_path)
    for f in (vocab_file, merges_file):
        if not f.is_file():
            raise DataError(f"vocab_merges_bpe baseline: missing {f}")
    try:
        vocab = json.loads(vocab_file.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{vocab_file}: {exc}") from exc
    if not isinstance(vocab, dict):
        raise DataError(f"{vocab_file}: expected an object mapping piece to id")

    ranks: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(
        merges_file.read_text(encoding="utf-8").splitlines(), 1
    ):
        if not line or line.startswith("#"):
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise DataError(f"{merges_file}:{lineno}: expected 'left right'")
        pair = (parts[0], parts[1])
        if pair in ranks:
            raise DataError(f"{merges_file}:{lineno}: duplicate merge {line!r}")
        ranks[pair] = len(ranks)

    def encode_word(word: str) -> tuple[list[int], list[str]]:
        symbols = [BYTE_TO_CHAR[b] for b in word.encode("utf-8", "surrogateescape")]
        pieces = apply_merges(symbols, ranks)
        ids = []
        for piece in pieces:
            pid = vocab.get(piece)
            if pid is None:
                raise DataError(f"piece {piece!r} missing from vocab.json")
            ids.append(pid)
        return ids, pieces

    name = vocab_file.parent.name or "vocab_merges_bpe"
    return BaselineTokenizer("vocab_merges_bpe", name, len(vocab), encode_word)


def _load_vocab_merges(path: Path) -> BaselineTokenizer:
    """Directory form used by the CLI: vocab.json + merges.txt side by side."""
    return load_vocab_merges(path / "vocab.json", path / "merges.txt")


def load_rank_file(path: str | Path) -> BaselineTokenizer:
    """Greedy lowest-rank byte-pair encoder from a base64-token rank table."""
    path = Path(path)
    ranks: dict[bytes, int] = {}
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'base64 rank'")
        try:
            token = base64.b64decode(parts[0], validate=True)
        except (binascii.Error, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad base64 {parts[0]!r}") from exc
        try:
            rank = int(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad rank {parts[1]!r}") from exc
        if token in ranks:
            raise DataError(f"{path}:{lineno}: duplicate token")
        ranks[token] = rank

    def encode_word(word: str) -> tuple[list[int], list[str]]:
        parts = [bytes([b]) for b in word.encode("utf-8", "surrogateescape")]
        while len(parts) > 1:
            best_rank: int | None = None
            best_i = -1
            for i in range(len(parts) - 1):
                r = ranks.get(parts[i] + parts[i + 1])
                if r is not None and (best_rank is None or r < best_rank):
                    best_rank = r
                    best_i = i
            if best_rank is None:
                break
            parts[best_i : best_i + 2] = [parts[best_i] + parts[best_i + 1]]
        ids = []
        pieces = []
        for part in parts:
            rank = ranks.get(part)
            if rank is None:
                raise DataError(
                    f"byte sequence {part!r} has no rank; the rank file is incomplete"
                )
            ids.append(rank)
            pieces.append("".join(BYTE_TO_CHAR[b] for b in part))
        return ids, pieces

    return BaselineTokenizer("rank_file_bpe", path.stem, len(ranks), encode_word)


def _load_unigram_tsv(path: Path) -> BaselineTokenizer:
    model = load_unigram(path)

    def encode_word(word: str) -> tuple[list[int], list[str]]:
        return encode_word_unigram(model, word)

    size = len(model.vocab.pieces) if model.vocab is not None else 0
    return BaselineTokenizer("unigram_tsv", path.stem, size, encode_word)


def _pure_byte() -> BaselineTokenizer:
    def encode_word(word: str) -> tuple[list[int], list[str]]:
        data = word.encode("utf-8", "surrogateescape")
        return list(data), [byte_token(b) for b in data]

    return BaselineTokenizer("pure_byte", "pure_byte", 256, encode_word)


def encode_baseline(
    enc: BaselineTokenizer, text: str, policy: PretokenPolicy, keep_delims: bool = False
) -> TokenSeq:
    """Uniform TokenSeq entry point shared with the trained-model encoders."""
    return enc.encode(text, policy, keep_delims)


def load_baseline(kind: str, path: str | Path | None = None) -> BaselineTokenizer:
    if kind not in BASELINE_KINDS:
        raise DataError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    if kind == "pure_byte":
        return _pure_byte()
    if path is None:
        raise DataError(f"baseline kind {kind!r} requires a path")
    path = Path(path)
    if kind == "vocab_merges_bpe":
        return _load_vocab_merges(path)
    if kind == "rank_file_bpe":
        return load_rank_file(path)
    return _load_unigram_tsv(path)
