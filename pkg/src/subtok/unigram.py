"""Unigram language-model tokenizer.

Training pipeline: capped-length substring seeding, EM over per-word
segmentation lattices (forward-backward in log space), likelihood-loss
pruning down to the target size, Viterbi decoding at encode time. All math
is in log space with -inf as the absent-edge sentinel.
"""

from __future__ import annotations

import math
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

NEG_INF = float("-inf")

# Nominal per-token score for byte-fallback pieces; they live outside the
# normalized LM mass and only ever fire for characters with no piece.
BYTE_PIECE_LOG_PROB = -20.0

# Deepest usable log-probability: exp() of it is the smallest positive
# normal float, so flooring a piece here leaves normalization intact.
FLOOR_LOG_PROB = math.log(2.2250738585072014e-308)


@dataclass(frozen=True)
class UnigramConfig:
    max_piece_length: int = 16
    seed_size_factor: int = 4
    em_iters: int = 2
    shrink_factor: float = 0.75
    coverage: float = 1.0
    specials: tuple[str, ...] = ()
    unk_token: str | None = None
    byte_fallback: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.shrink_factor <= 1:
            raise DataError("shrink_factor must be in (0, 1]")
        if not 0 < self.coverage <= 1:
            raise DataError("coverage must be in (0, 1]")
        if self.unk_token is not None and self.unk_token not in self.specials:
            raise DataError("unk_token must be listed in specials")


@dataclass
class UnigramModel:
    """pieces maps piece -> log_prob for the normalized LM pieces only."""

    pieces: dict[str, float]
    required_chars: set[str]
    unk_token: str | None = None
    byte_fallback: bool = True
    specials: list[str] = field(default_factory=list)
    max_piece_length: int = 16
    vocab: Vocab | None = None

    def piece_items(self) -> list[tuple[str, float]]:
        return list(self.pieces.items())

    def normalization_error(self) -> float:
        return abs(math.fsum(math.exp(lp) for lp in self.pieces.values()) - 1.0)


def _logsumexp(values: list[float]) -> float:
    m = max(values)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(sum(math.exp(v - m) for v in values))


def _char_frequencies(wc) -> dict[str, int]:
    freqs: dict[str, int] = {}
    for word, count in wc.entries.items():
        for ch in word:
            freqs[ch] = freqs.get(ch, 0) + count
    return freqs


def _covered_chars(wc, coverage: float) -> set[str]:
    """Most frequent characters whose occurrences reach the coverage share."""
    freqs = _char_frequencies(wc)
    if coverage >= 1.0:
        return set(freqs)
    total = sum(freqs.values())
    covered: set[str] = set()
    running = 0
    for ch, freq in sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0])):
        if running >= math.ceil(coverage * total):
            break
        covered.add(ch)
        running += freq
    return covered


def _trainable_words(wc, required: set[str]) -> list[tuple[str, int]]:
    """Words fully spelled by covered characters (EM input)."""
    return [
        (word, count)
        for word, count in wc.entries.items()
        if all(ch in required for ch in word)
    ]


def seed_vocab(
    wc,
    seed_size: int,
    max_piece_length: int = 16,
    *,
    coverage: float = 1.0,
    reserved_surfaces: set[str] | None = None,
) -> UnigramModel:
    """Enumerate capped-length substrings, keep the top seed_size candidates.

    Multi-character candidates are ranked by frequency*length; every covered
    character is force-included. Initial log-probabilities are the log of
    count-normalized substring frequencies.
    """
    covered = _covered_chars(wc, coverage)
    trainable = _trainable_words(wc, covered)
    # Restrict to characters that actually occur in trainable words so every
    # required character gets a nonzero seed frequency.
    required = {ch for word, _count in trainable for ch in word}
    if seed_size < len(required):
        raise DataError(
            f"seed_size {seed_size} is below the character-set size {len(required)}"
        )
    reserved_surfaces = reserved_surfaces or set()
    substr_freq: dict[str, int] = {}
    for word, count in trainable:
        n = len(word)
        for start in range(n):
            for end in range(start + 1, min(n, start + max_piece_length) + 1):
                sub = word[start:end]
                substr_freq[sub] = substr_freq.get(sub, 0) + count

    multi = [
        (sub, freq)
        for sub, freq in substr_freq.items()
        if len(sub) > 1 and sub not in reserved_surfaces
    ]
    multi.sort(key=lambda item: (-item[1] * len(item[0]), item[0]))
    chosen = sorted(required) + [sub for sub, _ in multi[: max(0, seed_size - len(required))]]

    total = sum(substr_freq.get(p, 0) for p in chosen)
    if total == 0:
        raise DataError("cannot seed a unigram model from an empty corpus")
    pieces = {p: math.log(substr_freq[p] / total) for p in chosen}
    return UnigramModel(
        pieces=pieces,
        required_chars=required,
        max_piece_length=max_piece_length,
    )


def _lattice_edges(
    word: str, pieces: dict[str, float], max_len: int
) -> list[list[tuple[int, str, float]]]:
    """edges[start] = [(end, piece, log_prob), ...] for matching pieces."""
    n = len(word)
    edges: list[list[tuple[int, str, float]]] = [[] for _ in range(n)]
    for start in range(n):
        limit = min(n, start + max_len)
        for end in range(start + 1, limit + 1):
            sub = word[start:end]
            lp = pieces.get(sub)
            if lp is not None and lp != NEG_INF:
                edges[start].append((end, sub, lp))
    return edges


def em_step(model: UnigramModel, wc) -> tuple[UnigramModel, float]:
    """One EM iteration; returns the new model and the corpus log-likelihood.

    The likelihood is computed under the input model (the one the E-step
    used), so the sequence of returned values is non-decreasing.
    """
    expected: dict[str, float] = {p: 0.0 for p in model.pieces}
    loglik = 0.0
    max_len = model.max_piece_length
    for word, count in _trainable_words(wc, model.required_chars):
        n = len(word)
        edges = _lattice_edges(word, model.pieces, max_len)
        alpha = [NEG_INF] * (n + 1)
        alpha[0] = 0.0
        for start in range(n):
            if alpha[start] == NEG_INF:
                continue
            for end, _piece, lp in edges[start]:
                val = alpha[start] + lp
                alpha[end] = val if alpha[end] == NEG_INF else _logsumexp([alpha[end], val])
        z = alpha[n]
        if z == NEG_INF:
            raise DataError(f"word {word!r} is not coverable by the current pieces")
        beta = [NEG_INF] * (n + 1)
        beta[n] = 0.0
        for start in range(n - 1, -1, -1):
            vals = [lp + beta[end] for end, _piece, lp in edges[start]]
            if vals:
                beta[start] = _logsumexp(vals)
        loglik += count * z
        for start in range(n):
            if alpha[start] == NEG_INF:
                continue
            for end, piece, lp in edges[start]:
                if beta[end] == NEG_INF:
                    continue
                posterior = math.exp(alpha[start] + lp + beta[end] - z)
                expected[piece] += count * posterior

    total = math.fsum(expected.values())
    if total <= 0:
        raise DataError("EM collapsed: no expected piece counts")
    new_pieces = {
        p: (math.log(e / total) if e > 0 else NEG_INF) for p, e in expected.items()
    }
    new_model = UnigramModel(
        pieces=new_pieces,
        required_chars=set(model.required_chars),
        unk_token=model.unk_token,
        byte_fallback=model.byte_fallback,
        specials=list(model.specials),
        max_piece_length=model.max_piece_length,
    )
    return new_model, loglik


def viterbi_segment(model: UnigramModel, word: str) -> tuple[list[str], float]:
    """Maximum-likelihood segmentation of a coverable word.

    Ties break toward fewer pieces, then leftmost-longest: scanning ends
    longest-first with strict improvement keeps the longest piece at every
    position among equal-score, equal-count continuations.
    """
    n = len(word)
    if n == 0:
        return [], 0.0
    max_len = model.max_piece_length
    pieces = model.pieces
    # best[i] = (score, n_pieces, end) for the best segmentation of word[i:]
    best: list[tuple[float, int, int] | None] = [None] * (n + 1)
    best[n] = (0.0, 0, n)
    for start in range(n - 1, -1, -1):
        top: tuple[float, int, int] | None = None
        for end in range(min(n, start + max_len), start, -1):
            tail = best[end]
            if tail is None:
                continue
            lp = pieces.get(word[start:end])
            if lp is None or lp == NEG_INF:
                continue
            score = lp + tail[0]
            count = 1 + tail[1]
            if top is None or score > top[0] or (score == top[0] and count < top[1]):
                top = (score, count, end)
        best[start] = top
    if best[0] is None:
        raise DataError(f"word {word!r} is not coverable by the model pieces")
    out: list[str] = []
    pos = 0
    while pos < n:
        _score, _count, end = best[pos]  # type: ignore[misc]
        out.append(word[pos:end])
        pos = end
    return out, best[0][0]


def _viterbi_score_without(model: UnigramModel, word: str, banned: str) -> float:
    """Best segmentation score when one piece is unavailable (-inf if none)."""
    n = len(word)
    max_len = model.max_piece_length
    pieces = model.pieces
    best = [NEG_INF] * (n + 1)
    best[n] = 0.0
    for start in range(n - 1, -1, -1):
        acc = NEG_INF
        for end in range(start + 1, min(n, start + max_len) + 1):
            if best[end] == NEG_INF:
                continue
            sub = word[start:end]
            if sub == banned:
                continue
            lp = pieces.get(sub)
            if lp is None or lp == NEG_INF:
                continue
            val = lp + best[end]
            if val > acc:
                acc = val
        best[start] = acc
    return best[0]


def _prune_to(model: UnigramModel, wc, keep_count: int) -> UnigramModel:
    names = list(model.pieces)
    n = len(names)
    removable = [p for p in names if len(p) > 1]
    min_keep = n - len(removable)
    if keep_count < min_keep:
        raise DataError(
            f"cannot prune to {keep_count} pieces: {min_keep} single-character "
            "pieces are not removable"
        )
    if keep_count >= n:
        return UnigramModel(
            pieces=dict(model.pieces),
            required_chars=set(model.required_chars),
            unk_token=model.unk_token,
            byte_fallback=model.byte_fallback,
            specials=list(model.specials),
            max_piece_length=model.max_piece_length,
        )

    loss: dict[str, float] = {p: 0.0 for p in removable}
    for word, count in _trainable_words(wc, model.required_chars):
        path, score = viterbi_segment(model, word)
        for piece in set(path):
            if len(piece) <= 1:
                continue
            alt = _viterbi_score_without(model, word, piece)
            loss[piece] += count * (score - alt)

    by_loss = sorted(removable, key=lambda p: (loss[p], p))
    dropped = set(by_loss[: n - keep_count])
    survivors = {p: lp for p, lp in model.pieces.items() if p not in dropped}
    log_total = _logsumexp(list(survivors.values()))
    renormed = {p: lp - log_total for p, lp in survivors.items()}
    return UnigramModel(
        pieces=renormed,
        required_chars=set(model.required_chars),
        unk_token=model.unk_token,
        byte_fallback=model.byte_fallback,
        specials=list(model.specials),
        max_piece_length=model.max_piece_length,
    )


def prune(model: UnigramModel, wc, keep_fraction: float) -> UnigramModel:
    """Drop the lowest-likelihood-loss share of removable pieces, renormalize."""
    if not 0 < keep_fraction <= 1:
        raise DataError("keep_fraction must be in (0, 1]")
    keep_count = math.ceil(len(model.pieces) * keep_fraction)
    return _prune_to(model, wc, keep_count)


def train_unigram(wc, vocab_size: int, config: UnigramConfig = UnigramConfig()) -> UnigramModel:
    """seed -> (EM x em_iters -> prune) until target size -> final EM pass."""
    n_reserved = len(config.specials) + (256 if config.byte_fallback else 0)
    lm_target = vocab_size - n_reserved
    required = _covered_chars(wc, config.coverage)
    if lm_target < len(required):
        raise DataError(
            f"vocab_size {vocab_size} leaves room for {lm_target} pieces, "
            f"below the {len(required)} required characters"
        )
    reserved_surfaces = set(config.specials) | set(all_byte_tokens())
    seed_size = max(config.seed_size_factor * vocab_size, len(required))
    model = seed_vocab(
        wc,
        seed_size,
        config.max_piece_length,
        coverage=config.coverage,
        reserved_surfaces=reserved_surfaces,
    )
    model.unk_token = config.unk_token
    model.byte_fallback = config.byte_fallback
    model.specials = list(config.specials)

    for _ in range(config.em_iters):
        model, _ll = em_step(model, wc)
    while len(model.pieces) > lm_target:
        n = len(model.pieces)
        keep = max(lm_target, math.ceil(n * config.shrink_factor))
        if keep >= n:
            keep = max(lm_target, n - 1)
        model = _prune_to(model, wc, keep)
        for _ in range(config.em_iters):
            model, _ll = em_step(model, wc)
    for _ in range(config.em_iters):
        model, _ll = em_step(model, wc)
    finalize(model)
    return model


def finalize(model: UnigramModel) -> UnigramModel:
    """Assign ids: specials, then byte pieces, then LM pieces by descending prob."""
    # EM can starve a rare required character until its expected count
    # underflows to zero; it must stay encodable, so it gets the deepest
    # finite score instead of the absent-edge sentinel.
    for ch in sorted(model.required_chars):
        if model.pieces.get(ch, NEG_INF) == NEG_INF:
            model.pieces[ch] = FLOOR_LOG_PROB
    ordered = sorted(model.pieces.items(), key=lambda kv: (-kv[1], kv[0]))
    pieces = list(model.specials)
    if model.byte_fallback:
        pieces.extend(all_byte_tokens())
    pieces.extend(p for p, _lp in ordered)
    model.vocab = Vocab(pieces, n_reserved=len(model.specials))
    return model


def _ensure_vocab(model: UnigramModel) -> Vocab:
    if model.vocab is None:
        finalize(model)
    return model.vocab  # type: ignore[return-value]


def encode_word_unigram(model: UnigramModel, word: str) -> tuple[list[int], list[str]]:
    """Viterbi-segment known-character runs; fall back per config otherwise."""
    vocab = _ensure_vocab(model)
    known = model.required_chars
    runs: list[tuple[str, bool]] = []
    for ch in word:
        if ch in known:
            if runs and runs[-1][1]:
                runs[-1] = (runs[-1][0] + ch, True)
            else:
                runs.append((ch, True))
        else:
            runs.append((ch, False))
    pieces: list[str] = []
    for chunk, coverable in runs:
        if coverable:
            path, _score = viterbi_segment(model, chunk)
            pieces.extend(path)
        elif model.byte_fallback:
            pieces.extend(bytes_to_tokens(chunk.encode("utf-8", "surrogateescape")))
        elif model.unk_token is not None:
            return [vocab.id_of(model.unk_token)], [model.unk_token]
        else:
            raise DataError(
                f"character {chunk!r} is not coverable and byte fallback is off"
            )
    return [vocab.id_of(p) for p in pieces], pieces


def encode_unigram(
    model: UnigramModel,
    text: str,
    policy: PretokenPolicy,
    keep_delims: bool = False,
) -> TokenSeq:
    return encode_with_policy(
        lambda w: encode_word_unigram(model, w), text, policy, keep_delims
    )


def decode_unigram(model: UnigramModel, ids) -> str:
    """Decode ids (or a TokenSeq) back to text; byte-token runs UTF-8 decode."""

    def pieces_to_text(pieces: list[str]) -> str:
        out: list[str] = []
        buf = bytearray()
        for piece in pieces:
            b = byte_token_value(piece)
            if b is not None:
                buf.append(b)
                continue
            if buf:
                out.append(buf.decode("utf-8", errors="surrogateescape"))
                buf.clear()
            out.append(piece)
        if buf:
            out.append(buf.decode("utf-8", errors="surrogateescape"))
        return "".join(out)

    if isinstance(ids, TokenSeq):
        seq = ids
        if seq.delims is None:
            return pieces_to_text(seq.pieces)
        parts: list[str] = []
        for span in seq.word_spans:
            parts.append(seq.delims[span.word_index])
            parts.append(
                pieces_to_text(
                    seq.pieces[span.token_start : span.token_start + span.token_count]
                )
            )
        parts.append(seq.delims[-1] if seq.delims else "")
        return "".join(parts)
    vocab = _ensure_vocab(model)
    return pieces_to_text([vocab.piece_of(i) for i in ids])


def save_unigram(model: UnigramModel, path: str | Path) -> None:
    """TSV in id order: 'piece<TAB>log_prob'; specials serialize as -inf."""
    vocab = _ensure_vocab(model)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#! unigram v1\n")
        for piece in vocab.pieces:
            if piece in model.pieces:
                lp = model.pieces[piece]
            elif byte_token_value(piece) is not None:
                lp = BYTE_PIECE_LOG_PROB
            else:
                lp = NEG_INF
            fh.write(f"{piece}\t{lp!r}\n")


def load_unigram(path: str | Path) -> UnigramModel:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0].strip() != "#! unigram v1":
        raise DataError(f"{path}: missing '#! unigram v1' header")
    ordered: list[str] = []
    pieces: dict[str, float] = {}
    specials: list[str] = []
    byte_fallback = False
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        if "\t" not in line:
            raise DataError(f"{path}:{lineno}: expected 'piece<TAB>log_prob'")
        piece, _, raw = line.partition("\t")
        try:
            lp = float(raw)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad log_prob {raw!r}") from exc
        if lp > 0:
            raise DataError(f"{path}:{lineno}: log_prob must be <= 0")
        ordered.append(piece)
        if byte_token_value(piece) is not None:
            byte_fallback = True
        elif lp == NEG_INF:
            specials.append(piece)
        else:
            pieces[piece] = lp
    model = UnigramModel(
        pieces=pieces,
        required_chars={p for p in pieces if len(p) == 1},
        byte_fallback=byte_fallback,
        specials=specials,
        max_piece_length=max((len(p) for p in pieces), default=1),
    )
    model.vocab = Vocab(ordered, n_reserved=len(specials))
    return model
