"""WordPiece: likelihood-gain merge training and greedy longest-match encoding.

Merge selection maximizes score(pair) = count(pair) / (count(left) * count(right)),
compared with exact rational arithmetic. Non-initial symbols carry the
continuation prefix from the first iteration on, so trained pieces are directly
usable by the longest-match encoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .corpus import PretokenPolicy
from .errors import DataError
from .tokens import TokenSeq, Vocab, encode_with_policy


@dataclass(frozen=True)
class WordPieceConfig:
    specials: tuple[str, ...] = ("[UNK]",)
    unk_token: str = "[UNK]"
    continuation_prefix: str = "##"
    max_word_chars: int = 100
    min_score: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.unk_token not in self.specials:
            raise DataError("unk_token must be listed in specials")
        if not self.continuation_prefix:
            raise DataError("continuation_prefix must be non-empty")


@dataclass
class WordPieceModel:
    vocab: Vocab
    continuation_prefix: str = "##"
    unk_token: str = "[UNK]"
    max_word_chars: int = 100


def _word_symbols(word: str, prefix: str) -> list[str]:
    return [word[0]] + [prefix + ch for ch in word[1:]]


def _merge_product(left: str, right: str, prefix: str) -> str:
    # The right constituent always carries the prefix (it is non-initial by
    # position); strip it so the product reads as one piece.
    return left + right[len(prefix):]


def train_wordpiece(wc, vocab_size: int, config: WordPieceConfig = WordPieceConfig()) -> WordPieceModel:
    """Iteratively merge the pair with the highest likelihood-gain score.

    Ties break on higher pair count, then lexicographically smaller pair.
    Stops at vocab_size, when no pair remains, or when the best score drops
    below config.min_score.
    """
    prefix = config.continuation_prefix
    words = [list(_word_symbols(w, prefix)) for w in wc.entries]
    counts = list(wc.entries.values())

    initial_chars = sorted({w[0] for w in wc.entries})
    cont_chars = sorted({prefix + ch for word in wc.entries for ch in word[1:]})
    alphabet = initial_chars + cont_chars
    base = len(config.specials) + len(alphabet)
    if vocab_size < base:
        raise DataError(
            f"vocab_size {vocab_size} is below alphabet+specials size {base}"
        )

    sym_counts: dict[str, int] = {}
    pair_counts: dict[tuple[str, str], int] = {}
    pair_where: dict[tuple[str, str], set[int]] = {}
    for idx, w in enumerate(words):
        c = counts[idx]
        for sym in w:
            sym_counts[sym] = sym_counts.get(sym, 0) + c
        for pair in zip(w, w[1:]):
            pair_counts[pair] = pair_counts.get(pair, 0) + c
            pair_where.setdefault(pair, set()).add(idx)

    taken = set(config.specials) | set(alphabet)
    products: list[str] = []
    budget = vocab_size - base
    while len(products) < budget and pair_counts:
        best: tuple[str, str] | None = None
        best_score = Fraction(0)
        best_count = 0
        for pair, count in pair_counts.items():
            product = _merge_product(pair[0], pair[1], prefix)
            if product in taken:
                continue
            if not pair[0].startswith(prefix) and product.startswith(prefix):
                # A word-initial piece reading as a continuation piece would
                # corrupt longest-match lookup; never learn one.
                continue
            score = Fraction(count, sym_counts[pair[0]] * sym_counts[pair[1]])
            if score < best_score:
                continue
            if score == best_score and best is not None:
                if count < best_count:
                    continue
                if count == best_count and pair >= best:
                    continue
            best, best_score, best_count = pair, score, count
        if best is None or best_score < config.min_score:
            break
        product = _merge_product(best[0], best[1], prefix)
        products.append(product)
        taken.add(product)
        for idx in pair_where.get(best, set()).copy():
            w = words[idx]
            c = counts[idx]
            before_pairs = list(zip(w, w[1:]))
            new_w: list[str] = []
            i = 0
            while i < len(w):
                if i + 1 < len(w) and (w[i], w[i + 1]) == best:
                    new_w.append(product)
                    i += 2
                else:
                    new_w.append(w[i])
                    i += 1
            words[idx] = new_w
            merged_here = (len(w) - len(new_w))
            sym_counts[best[0]] = sym_counts.get(best[0], 0) - merged_here * c
            sym_counts[best[1]] = sym_counts.get(best[1], 0) - merged_here * c
            sym_counts[product] = sym_counts.get(product, 0) + merged_here * c
            for sym in (best[0], best[1]):
                if sym_counts.get(sym) == 0:
                    del sym_counts[sym]
            after_pairs = list(zip(new_w, new_w[1:]))
            for pair in before_pairs:
                pair_counts[pair] -= c
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                    pair_where.pop(pair, None)
            for pair in after_pairs:
                pair_counts[pair] = pair_counts.get(pair, 0) + c
                pair_where.setdefault(pair, set()).add(idx)
            for pair in set(before_pairs) - set(after_pairs):
                where = pair_where.get(pair)
                if where is not None:
                    where.discard(idx)

    pieces = list(config.specials) + alphabet + products
    vocab = Vocab(pieces, n_reserved=len(config.specials))
    return WordPieceModel(
        vocab=vocab,
        continuation_prefix=prefix,
        unk_token=config.unk_token,
        max_word_chars=config.max_word_chars,
    )


def encode_word_wordpiece(model: WordPieceModel, word: str) -> tuple[list[int], list[str]]:
    """Greedy longest-match; whole word becomes [unk_token] on any failure."""
    unk = ([model.vocab.id_of(model.unk_token)], [model.unk_token])
    if len(word) > model.max_word_chars:
        return unk
    prefix = model.continuation_prefix
    pieces: list[str] = []
    start = 0
    n = len(word)
    while start < n:
        end = n
        match: str | None = None
        while end > start:
            sub = word[start:end]
            if start > 0:
                sub = prefix + sub
            elif sub.startswith(prefix):
                end -= 1
                continue
            if sub in model.vocab:
                match = sub
                break
            end -= 1
        if match is None:
            return unk
        pieces.append(match)
        start = end
    return [model.vocab.id_of(p) for p in pieces], pieces


def encode_wordpiece(
    model: WordPieceModel,
    text: str,
    policy: PretokenPolicy,
    keep_delims: bool = False,
) -> TokenSeq:
    return encode_with_policy(
        lambda w: encode_word_wordpiece(model, w), text, policy, keep_delims
    )


def unk_word_indices(model: WordPieceModel, seq: TokenSeq) -> set[int]:
    """Span indices whose word collapsed to the UNK token."""
    flagged: set[int] = set()
    for span in seq.word_spans:
        span_pieces = seq.pieces[span.token_start : span.token_start + span.token_count]
        if span_pieces == [model.unk_token]:
            flagged.add(span.word_index)
    return flagged


def _strip(piece: str, prefix: str) -> str:
    return piece[len(prefix):] if piece.startswith(prefix) else piece


def decode_wordpiece(model: WordPieceModel, ids) -> str:
    """Decode to text; word boundaries come from non-continuation pieces.

    A raw id list is rejoined with single spaces between words (the inverse
    of whitespace pre-tokenization up to UNK losses); a TokenSeq decoded in
    evaluation mode reuses its recorded delimiters.
    """
    prefix = model.continuation_prefix
    if isinstance(ids, TokenSeq):
        seq = ids
        if seq.delims is None:
            return "".join(_strip(p, prefix) for p in seq.pieces)
        parts: list[str] = []
        for span in seq.word_spans:
            parts.append(seq.delims[span.word_index])
            span_pieces = seq.pieces[span.token_start : span.token_start + span.token_count]
            parts.append("".join(_strip(p, prefix) for p in span_pieces))
        parts.append(seq.delims[-1] if seq.delims else "")
        return "".join(parts)
    words: list[str] = []
    for idx in ids:
        piece = model.vocab.piece_of(idx)
        if piece.startswith(prefix) and words:
            words[-1] += piece[len(prefix):]
        else:
            words.append(piece)
    return " ".join(words)


def save_wordpiece(model: WordPieceModel, path: str | Path) -> None:
    """One piece per line; metadata in a leading '#!' header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    for piece in model.vocab.pieces:
        if "\n" in piece or "\r" in piece:
            raise DataError("pieces containing newlines cannot be serialized")
    header = (
        f"#! wordpiece v1 prefix={model.continuation_prefix} "
        f"unk={model.unk_token} max_word_chars={model.max_word_chars}"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for piece in model.vocab.pieces:
            fh.write(piece + "\n")


def load_wordpiece(path: str | Path) -> WordPieceModel:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("#!"):
        raise DataError(f"{path}: missing '#!' wordpiece header line")
    header = lines[0][2:].split()
    if not header or header[0] != "wordpiece":
        raise DataError(f"{path}: not a wordpiece vocabulary file")
    meta = {}
    for field in header[2:]:
        if "=" not in field:
            raise DataError(f"{path}: malformed header field {field!r}")
        key, _, value = field.partition("=")
        meta[key] = value
    pieces = lines[1:]
    prefix = meta.get("prefix", "##")
    unk = meta.get("unk", "[UNK]")
    vocab = Vocab(pieces, n_reserved=1 if unk in pieces[:1] else 0)
    if unk not in vocab:
        raise DataError(f"{path}: unk token {unk!r} missing from vocabulary")
    return WordPieceModel(
        vocab=vocab,
        continuation_prefix=prefix,
        unk_token=unk,
        max_word_chars=int(meta.get("max_word_chars", "100")),
    )
