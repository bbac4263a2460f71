"""Byte-Pair Encoding: merge-table training and greedy rank-ordered encoding.

Training operates on a WordCounts multiset (pairs never cross word
boundaries). Base symbols are characters by default, with raw UTF-8 byte
tokens as the fallback for characters outside the training alphabet; a
byte-level mode (GPT-2-style surrogate alphabet) is available via config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import PretokenPolicy
from .errors import DataError
from .tokens import (
    TokenSeq,
    Vocab,
    all_byte_tokens,
    byte_token_value,
    bytes_to_tokens,
    encode_with_policy,
)

# GPT-2-style printable stand-ins for raw bytes, used by byte-level mode and
# by the vocab+merges interop format.
def bytes_to_unicode() -> dict[int, str]:
    """Map every byte 0..255 to a printable unicode character, injectively."""
    keep = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    chars = keep[:]
    n = 0
    for b in range(256):
        if b not in keep:
            keep.append(b)
            chars.append(256 + n)
            n += 1
    return dict(zip(keep, (chr(c) for c in chars)))

BYTE_TO_CHAR = bytes_to_unicode()
CHAR_TO_BYTE = {c: b for b, c in BYTE_TO_CHAR.items()}


class MergeTable:
    """Ordered (left, right) merge pairs; list position is the rank."""

    __slots__ = ("merges", "ranks")

    def __init__(self, merges: list[tuple[str, str]]):
        self.merges = [tuple(m) for m in merges]
        self.ranks: dict[tuple[str, str], int] = {}
        for rank, pair in enumerate(self.merges):
            if pair in self.ranks:
                raise DataError(f"duplicate merge pair at rank {rank}: {pair}")
            self.ranks[pair] = rank

    def __len__(self) -> int:
        return len(self.merges)

    def __iter__(self):
        return iter(self.merges)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MergeTable) and self.merges == other.merges


@dataclass(frozen=True)
class BpeConfig:
    """Trainer knobs. mode is "char" (default) or "byte"."""

    min_frequency: int = 2
    byte_fallback: bool = True
    specials: tuple[str, ...] = ()
    unk_token: str | None = None
    mode: str = "char"

    def __post_init__(self) -> None:
        if self.mode not in ("char", "byte"):
            raise DataError(f"unknown bpe mode: {self.mode!r}")
        if self.unk_token is not None and self.unk_token not in self.specials:
            raise DataError("unk_token must be listed in specials")


@dataclass
class BpeModel:
    vocab: Vocab
    merges: MergeTable
    byte_fallback: bool
    specials: list[str]
    unk_token: str | None = None
    mode: str = "char"
    alphabet: set[str] = field(default_factory=set)

    def base_size(self) -> int:
        """Ids taken before any merge: reserved block + alphabet."""
        return self.vocab.n_reserved + len(self.alphabet)


def _reserved_pieces(config: BpeConfig) -> list[str]:
    reserved = list(config.specials)
    if config.mode == "char" and config.byte_fallback:
        reserved.extend(all_byte_tokens())
    return reserved


def _word_symbols(word: str, mode: str) -> tuple[str, ...]:
    if mode == "byte":
        return tuple(BYTE_TO_CHAR[b] for b in word.encode("utf-8", "surrogateescape"))
    return tuple(word)


def train_bpe(wc, vocab_size: int, config: BpeConfig = BpeConfig()) -> BpeModel:
    """Learn merges by repeatedly joining the most frequent adjacent pair.

    Stops when the vocabulary reaches vocab_size or no pair occurs at least
    config.min_frequency times. Ties on frequency break lexicographically on
    (left, right) so training is deterministic.
    """
    reserved = _reserved_pieces(config)
    words: list[list[str]] = []
    counts: list[int] = []
    for word, count in wc.entries.items():
        words.append(list(_word_symbols(word, config.mode)))
        counts.append(count)

    if config.mode == "byte":
        alphabet = sorted(BYTE_TO_CHAR.values())
    else:
        alphabet = sorted({sym for w in words for sym in w})
    base = len(reserved) + len(alphabet)
    if vocab_size < base:
        raise DataError(
            f"vocab_size {vocab_size} is below alphabet+reserved size {base}"
        )

    taken: set[str] = set(reserved) | set(alphabet)
    pair_counts: dict[tuple[str, str], int] = {}
    pair_where: dict[tuple[str, str], set[int]] = {}
    for idx, w in enumerate(words):
        c = counts[idx]
        for pair in zip(w, w[1:]):
            pair_counts[pair] = pair_counts.get(pair, 0) + c
            pair_where.setdefault(pair, set()).add(idx)

    merges: list[tuple[str, str]] = []
    budget = vocab_size - base
    while len(merges) < budget:
        best: tuple[str, str] | None = None
        best_count = 0
        for pair, count in pair_counts.items():
            if count < config.min_frequency:
                continue
            if count < best_count:
                continue
            if count == best_count and best is not None and pair >= best:
                continue
            if pair[0] + pair[1] in taken:
                continue
            best, best_count = pair, count
        if best is None:
            break
        merges.append(best)
        product = best[0] + best[1]
        taken.add(product)
        for idx in pair_where.get(best, set()).copy():
            w = words[idx]
            c = counts[idx]
            before = list(zip(w, w[1:]))
            new_w = _merge_pair(w, best, product)
            words[idx] = new_w
            after = list(zip(new_w, new_w[1:]))
            for pair in before:
                pair_counts[pair] -= c
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                    pair_where.pop(pair, None)
            for pair in after:
                pair_counts[pair] = pair_counts.get(pair, 0) + c
                pair_where.setdefault(pair, set()).add(idx)
            stale = {p for p in before if p not in after}
            for pair in stale:
                where = pair_where.get(pair)
                if where is not None:
                    where.discard(idx)

    pieces = reserved + alphabet + [l + r for l, r in merges]
    vocab = Vocab(pieces, n_reserved=len(reserved))
    return BpeModel(
        vocab=vocab,
        merges=MergeTable(merges),
        byte_fallback=config.byte_fallback if config.mode == "char" else False,
        specials=list(config.specials),
        unk_token=config.unk_token,
        mode=config.mode,
        alphabet=set(alphabet),
    )


def _merge_pair(symbols: list[str], pair: tuple[str, str], product: str) -> list[str]:
    """Merge every occurrence of pair, scanning left to right."""
    out: list[str] = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(product)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def apply_merges(symbols: list[str], ranks: dict[tuple[str, str], int]) -> list[str]:
    """Repeatedly apply the lowest-rank merge present until none applies.

    Merging every occurrence of the chosen pair in one left-to-right pass is
    equivalent to one-at-a-time leftmost application for well-formed tables
    (any pair involving the new product was learned at a later rank).
    """
    symbols = list(symbols)
    while len(symbols) > 1:
        best_rank: int | None = None
        best_pair: tuple[str, str] | None = None
        for pair in zip(symbols, symbols[1:]):
            rank = ranks.get(pair)
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank, best_pair = rank, pair
        if best_pair is None:
            break
        symbols = _merge_pair(symbols, best_pair, best_pair[0] + best_pair[1])
    return symbols


def encode_word_bpe(model: BpeModel, word: str) -> tuple[list[int], list[str]]:
    """Encode one word: base symbols, fallback expansion, then merges."""
    symbols: list[str] = []
    if model.mode == "byte":
        symbols = [BYTE_TO_CHAR[b] for b in word.encode("utf-8", "surrogateescape")]
    else:
        for ch in word:
            if ch in model.alphabet:
                symbols.append(ch)
            elif model.byte_fallback:
                symbols.extend(bytes_to_tokens(ch.encode("utf-8", "surrogateescape")))
            elif model.unk_token is not None:
                symbols.append(model.unk_token)
            else:
                raise DataError(
                    f"character {ch!r} outside alphabet with byte_fallback off "
                    "and no unk token"
                )
    pieces = apply_merges(symbols, model.merges.ranks)
    return [model.vocab.id_of(p) for p in pieces], pieces


def encode_bpe(
    model: BpeModel,
    text: str,
    policy: PretokenPolicy,
    keep_delims: bool = False,
) -> TokenSeq:
    """Pre-tokenize per policy and encode each word against the merge table."""
    return encode_with_policy(
        lambda w: encode_word_bpe(model, w), text, policy, keep_delims
    )


def _pieces_to_text(pieces: list[str], byte_mode: bool) -> str:
    out: list[str] = []
    buf = bytearray()

    def flush() -> None:
        if buf:
            out.append(buf.decode("utf-8", errors="surrogateescape"))
            buf.clear()

    for piece in pieces:
        if byte_mode:
            if all(c in CHAR_TO_BYTE for c in piece):
                buf.extend(CHAR_TO_BYTE[c] for c in piece)
            else:
                flush()
                out.append(piece)
            continue
        b = byte_token_value(piece)
        if b is not None:
            buf.append(b)
            continue
        flush()
        out.append(piece)
    flush()
    return "".join(out)


def decode_bpe(model: BpeModel, ids) -> str:
    """Decode ids (or a TokenSeq) back to text.

    A TokenSeq decoded in evaluation mode re-interleaves its recorded
    delimiters; a raw id list concatenates piece surfaces (stream-mode ids
    already carry the delimiters as tokens).
    """
    byte_mode = model.mode == "byte"
    if isinstance(ids, TokenSeq):
        seq = ids
        if seq.delims is None:
            return _pieces_to_text(seq.pieces, byte_mode)
        parts: list[str] = []
        for span in seq.word_spans:
            parts.append(seq.delims[span.word_index])
            parts.append(
                _pieces_to_text(
                    seq.pieces[span.token_start : span.token_start + span.token_count],
                    byte_mode,
                )
            )
        parts.append(seq.delims[-1] if seq.delims else "")
        return "".join(parts)
    pieces = [model.vocab.piece_of(i) for i in ids]
    return _pieces_to_text(pieces, byte_mode)


def save_bpe(model: BpeModel, out_dir: str | Path) -> None:
    """Write vocab.txt (JSON-escaped piece per line), merges.txt, meta.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for left, right in model.merges:
        if any(ch.isspace() for ch in left + right):
            raise DataError(
                "merge symbols containing whitespace cannot be serialized in "
                "the vocab+merges format; train in byte mode instead"
            )
    with open(out_dir / "vocab.txt", "w", encoding="utf-8") as fh:
        for piece in model.vocab.pieces:
            fh.write(json.dumps(piece, ensure_ascii=False) + "\n")
    with open(out_dir / "merges.txt", "w", encoding="utf-8") as fh:
        for left, right in model.merges:
            fh.write(f"{left} {right}\n")
    meta = {
        "algorithm": "bpe",
        "mode": model.mode,
        "byte_fallback": model.byte_fallback,
        "specials": model.specials,
        "unk_token": model.unk_token,
        "n_reserved": model.vocab.n_reserved,
    }
    with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def load_bpe(model_dir: str | Path) -> BpeModel:
    """Inverse of save_bpe."""
    model_dir = Path(model_dir)
    meta_path = model_dir / "meta.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed {meta_path}: {exc}") from exc

    pieces: list[str] = []
    vocab_path = model_dir / "vocab.txt"
    try:
        lines = vocab_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {vocab_path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        try:
            piece = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{vocab_path}:{lineno}: malformed piece: {exc}") from exc
        if not isinstance(piece, str):
            raise DataError(f"{vocab_path}:{lineno}: piece is not a string")
        pieces.append(piece)

    merges: list[tuple[str, str]] = []
    merges_path = model_dir / "merges.txt"
    try:
        merge_lines = merges_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {merges_path}: {exc}") from exc
    for lineno, line in enumerate(merge_lines, 1):
        if not line or line.startswith("#"):
            continue
        fields = line.split(" ")
        if len(fields) != 2:
            raise DataError(f"{merges_path}:{lineno}: expected 'left right'")
        merges.append((fields[0], fields[1]))

    n_reserved = int(meta.get("n_reserved", 0))
    vocab = Vocab(pieces, n_reserved=n_reserved)
    alphabet = {p for p in pieces[n_reserved:] if len(p) == 1}
    piece_set = set(pieces)
    formable = set(alphabet) | set(pieces[:n_reserved])
    for rank, (left, right) in enumerate(merges):
        if left not in formable or right not in formable:
            raise DataError(
                f"{merges_path}: merge {rank} ({left!r},{right!r}) references "
                "a symbol that is neither base nor an earlier product"
            )
        product = left + right
        if product not in piece_set:
            raise DataError(f"{merges_path}: merge {rank} product missing from vocab")
        formable.add(product)
    return BpeModel(
        vocab=vocab,
        merges=MergeTable(merges),
        byte_fallback=bool(meta.get("byte_fallback", False)),
        specials=list(meta.get("specials", [])),
        unk_token=meta.get("unk_token"),
        mode=meta.get("mode", "char"),
        alphabet=alphabet,
    )
