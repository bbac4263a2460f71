"""Shared token-level primitives: vocabularies, byte-fallback tokens, TokenSeq.

Every encoder in the toolkit (trained models and loaded baselines) produces a
TokenSeq so the metrics layer can treat them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DataError

# Surface form of a raw-byte fallback token, e.g. byte 0xE0 -> "<0xE0>".
_BYTE_TOKENS = [f"<0x{n:02X}>" for n in range(256)]
_BYTE_TOKEN_INDEX = {tok: n for n, tok in enumerate(_BYTE_TOKENS)}


def byte_token(n: int) -> str:
    """Surface form of the fallback token for byte value n (0..255)."""
    return _BYTE_TOKENS[n]


def byte_token_value(piece: str) -> int | None:
    """Inverse of byte_token; None if piece is not a byte token surface."""
    return _BYTE_TOKEN_INDEX.get(piece)


def bytes_to_tokens(data: bytes) -> list[str]:
    """UTF-8 fallback expansion: one token per raw byte."""
    return [_BYTE_TOKENS[b] for b in data]


def all_byte_tokens() -> list[str]:
    return list(_BYTE_TOKENS)


class Vocab:
    """Dense id <-> piece bijection. Specials (reserved tokens) occupy the lowest ids."""

    __slots__ = ("pieces", "index", "n_reserved")

    def __init__(self, pieces: list[str], n_reserved: int = 0):
        self.pieces = list(pieces)
        self.index = {p: i for i, p in enumerate(self.pieces)}
        self.n_reserved = n_reserved
        if len(self.index) != len(self.pieces):
            seen: set[str] = set()
            for p in self.pieces:
                if p in seen:
                    raise DataError(f"duplicate vocab piece: {p!r}")
                seen.add(p)

    def __len__(self) -> int:
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self.index

    def id_of(self, piece: str) -> int:
        try:
            return self.index[piece]
        except KeyError:
            raise DataError(f"piece not in vocab: {piece!r}") from None

    def piece_of(self, idx: int) -> str:
        if not 0 <= idx < len(self.pieces):
            raise DataError(f"token id out of range: {idx} (vocab size {len(self.pieces)})")
        return self.pieces[idx]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.pieces == other.pieces

    def __repr__(self) -> str:
        return f"Vocab({len(self.pieces)} pieces, {self.n_reserved} reserved)"


@dataclass(frozen=True)
class WordSpan:
    """Token range [token_start, token_start+token_count) covering one word."""

    word_index: int
    token_start: int
    token_count: int


@dataclass
class TokenSeq:
    """Encoder output: ids, surface pieces, and per-word token boundaries.

    `words` holds the surface string of each span's unit and `delims` the
    delimiter strings dropped between units (len(words)+1 entries) when the
    encoder ran in evaluation mode; in stream mode (`keep_delims=True` at
    encode time) delimiter runs are token-bearing units themselves and
    `delims` is None.
    """

    ids: list[int]
    pieces: list[str]
    word_spans: list[WordSpan]
    words: list[str] = field(default_factory=list)
    delims: list[str] | None = None

    def validate(self) -> None:
        """Assert the structural invariants; raises DataError on violation."""
        total = 0
        pos = 0
        for span in self.word_spans:
            if span.token_count < 1:
                raise DataError("empty word span")
            if span.token_start != pos:
                raise DataError("word spans not contiguous from token 0")
            pos = span.token_start + span.token_count
            total += span.token_count
        if total != len(self.ids):
            raise DataError(
                f"span token counts ({total}) do not cover all ids ({len(self.ids)})"
            )
        if len(self.pieces) != len(self.ids):
            raise DataError("pieces/ids length mismatch")

    def token_count(self) -> int:
        return len(self.ids)


def build_token_seq(
    unit_encodings: list[tuple[list[int], list[str]]],
    unit_surfaces: list[str],
    delims: list[str] | None,
) -> TokenSeq:
    """Assemble a TokenSeq from per-unit (ids, pieces) encodings."""
    ids: list[int] = []
    pieces: list[str] = []
    spans: list[WordSpan] = []
    for n, (unit_ids, unit_pieces) in enumerate(unit_encodings):
        spans.append(WordSpan(n, len(ids), len(unit_ids)))
        ids.extend(unit_ids)
        pieces.extend(unit_pieces)
    return TokenSeq(ids, pieces, spans, list(unit_surfaces), delims)


def encode_with_policy(encode_word, text: str, policy, keep_delims: bool = False) -> TokenSeq:
    """Split text per policy and encode each unit with encode_word.

    Evaluation mode (default): only words become token-bearing units; the
    delimiter strings are recorded on the TokenSeq. Stream mode
    (keep_delims=True): delimiter runs are encoded as units of their own so
    the id stream alone reconstructs the text.
    """
    from .corpus import normalize, split_with_delims

    text = normalize(text, policy)
    words, delims = split_with_delims(text, policy)
    if not keep_delims:
        encodings = [encode_word(w) for w in words]
        return build_token_seq(encodings, words, delims)
    units: list[str] = []
    for i, word in enumerate(words):
        if delims[i]:
            units.append(delims[i])
        units.append(word)
    if delims and delims[-1]:
        units.append(delims[-1])
    encodings = [encode_word(u) for u in units]
    return build_token_seq(encodings, units, None)
