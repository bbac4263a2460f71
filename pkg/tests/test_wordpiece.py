import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subtok.corpus import PretokenPolicy, WordCounts
from subtok.errors import DataError
from subtok.wordpiece import (
    WordPieceConfig,
    decode_wordpiece,
    encode_word_wordpiece,
    encode_wordpiece,
    load_wordpiece,
    save_wordpiece,
    train_wordpiece,
    unk_word_indices,
)

from reference_impls import naive_wordpiece_products

NONE_WS = PretokenPolicy(normalization="none")


def wc(entries):
    return WordCounts(dict(entries))


def base_size(entries, n_specials=1):
    """Ids used before any product: specials + initial chars + ##chars."""
    initials = {w[0] for w in entries}
    conts = {ch for w in entries for ch in w[1:]}
    return n_specials + len(initials) + len(conts)


def products_of(model, entries, n_specials=1):
    return model.vocab.pieces[base_size(entries, n_specials):]


class TestTrainSmall:
    def test_single_word_example(self):
        model = train_wordpiece(wc({"ab": 1}), 5, WordPieceConfig())
        assert model.vocab.pieces == ["[UNK]", "a", "##b", "ab"]

    def test_vocab_layout_chars_sorted(self):
        entries = {"cab": 4, "ba": 3}
        model = train_wordpiece(wc(entries), 20)
        pieces = model.vocab.pieces
        assert pieces[0] == "[UNK]"
        assert pieces[1:3] == ["b", "c"]
        assert pieces[3:5] == ["##a", "##b"]

    def test_score_prefers_rare_parts(self):
        # (x,##y): 3/(3*3) = 1/3 beats (a,##b): 4/(8*4) = 1/8
        entries = {"xy": 3, "ab": 4, "a": 4, "b": 1}
        model = train_wordpiece(wc(entries), 30)
        assert products_of(model, entries)[0] == "xy"

    def test_tie_breaks_on_count_then_lex(self):
        # both pairs score 1/2 with count 2: ('a','##b') < ('c','##d')
        entries = {"ab": 2, "cd": 2}
        model = train_wordpiece(wc(entries), 30)
        assert products_of(model, entries)[0] == "ab"

    def test_higher_count_wins_equal_score(self):
        # (x,##y): 4/(4*4) = 1/4 with count 4
        # (a,##b): 1/(2*2) = 1/4 with count 1
        # (c,##b): 1/(4*2) = 1/8
        # equal best score: the count decides, and lex would have said "ab"
        entries = {"xy": 4, "ab": 1, "cb": 1, "a": 1, "c": 3}
        model = train_wordpiece(wc(entries), 30)
        assert products_of(model, entries)[0] == "xy"

    def test_word_initial_product_never_looks_like_continuation(self):
        # word "##x" has symbols ["#", "###", "##x"]; the pair ("#","###")
        # would produce "##" which reads as a continuation piece, so it is
        # skipped and only ("###","##x") -> "###x" is learned
        entries = {"##x": 5}
        model = train_wordpiece(wc(entries), 30)
        assert products_of(model, entries) == ["###x"]
        _, pieces = encode_word_wordpiece(model, "##x")
        assert pieces == ["#", "###x"]

    def test_budget_respected(self):
        model = train_wordpiece(wc({"abcd": 5}), 7, WordPieceConfig())
        assert len(model.vocab) <= 7


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(25))
    def test_products_match_naive_recount(self, seed):
        rng = random.Random(seed)
        alphabet = "abcd"[: rng.randint(2, 4)]
        entries = {}
        for _ in range(rng.randint(1, 10)):
            word = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6)))
            entries[word] = entries.get(word, 0) + rng.randint(1, 4)
        counts = WordCounts(entries)
        max_products = rng.randint(1, 10)

        model = train_wordpiece(counts, base_size(entries) + max_products)
        expected = naive_wordpiece_products(entries, max_products)
        assert products_of(model, entries) == expected


class TestEncode:
    @pytest.fixture()
    def model(self):
        return train_wordpiece(
            wc({"under": 8, "standing": 6, "understanding": 4}), 60
        )

    def test_greedy_longest_match(self, model):
        _, pieces = encode_word_wordpiece(model, "understanding")
        candidates = [
            p
            for p in model.vocab.pieces
            if not p.startswith("##") and "understanding".startswith(p)
        ]
        assert pieces[0] == max(candidates, key=len)
        rebuilt = pieces[0] + "".join(p[2:] for p in pieces[1:])
        assert rebuilt == "understanding"

    def test_continuation_prefix_on_tail(self, model):
        _, pieces = encode_word_wordpiece(model, "understand")
        assert all(p.startswith("##") for p in pieces[1:])

    def test_unknown_word_becomes_unk(self, model):
        ids, pieces = encode_word_wordpiece(model, "xyz")
        assert pieces == ["[UNK]"]
        assert ids == [model.vocab.id_of("[UNK]")]

    def test_partial_match_still_unk(self, model):
        _, pieces = encode_word_wordpiece(model, "undz")
        assert pieces == ["[UNK]"]

    def test_too_long_word_unk(self, model):
        _, pieces = encode_word_wordpiece(model, "u" * 101)
        assert pieces == ["[UNK]"]

    def test_word_initial_never_uses_continuation_piece(self):
        model = train_wordpiece(wc({"ab": 5, "b": 5}), 20)
        _, pieces = encode_word_wordpiece(model, "b")
        assert pieces == ["b"]

    def test_unk_word_indices(self, model):
        seq = encode_wordpiece(model, "under xyz standing", NONE_WS)
        assert unk_word_indices(model, seq) == {1}

    def test_decode_restores_text(self, model):
        text = "under  understanding"
        seq = encode_wordpiece(model, text, NONE_WS)
        assert decode_wordpiece(model, seq) == text

    @given(st.text(alphabet="abcxyz", min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_roundtrip_or_unk_property(self, word):
        model = train_wordpiece(wc({"abc": 3, "ab": 2, "c": 1}), 12)
        ids, pieces = encode_word_wordpiece(model, word)
        if pieces == ["[UNK]"]:
            seq = encode_wordpiece(model, word, NONE_WS)
            assert unk_word_indices(model, seq) == {0}
        else:
            rebuilt = pieces[0] + "".join(p[2:] for p in pieces[1:])
            assert rebuilt == word


class TestSaveLoad:
    def test_roundtrip(self, tmp_path):
        model = train_wordpiece(wc({"abab": 4, "ab": 2}), 12)
        path = tmp_path / "vocab.txt"
        save_wordpiece(model, path)
        loaded = load_wordpiece(path)
        assert loaded.vocab.pieces == model.vocab.pieces
        assert loaded.unk_token == model.unk_token
        assert loaded.continuation_prefix == model.continuation_prefix
        assert loaded.max_word_chars == model.max_word_chars
        for word in ("abab", "ab", "ba", "zz"):
            assert encode_word_wordpiece(loaded, word) == encode_word_wordpiece(model, word)

    def test_header_line(self, tmp_path):
        model = train_wordpiece(wc({"ab": 2}), 8)
        path = tmp_path / "vocab.txt"
        save_wordpiece(model, path)
        first = path.read_text(encoding="utf-8").splitlines()[0]
        assert first.startswith("#!")
        assert "wordpiece" in first

    def test_load_rejects_duplicate_piece(self, tmp_path):
        model = train_wordpiece(wc({"ab": 2}), 8)
        path = tmp_path / "vocab.txt"
        save_wordpiece(model, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        lines.append(lines[-1])
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_wordpiece(path)


class TestConfig:
    def test_unk_must_be_special(self):
        with pytest.raises(DataError):
            WordPieceConfig(specials=("[PAD]",), unk_token="[UNK]")

    def test_min_score_filters(self):
        cfg = WordPieceConfig(min_score=Fraction(2))
        model = train_wordpiece(wc({"ab": 3}), 10, cfg)
        assert products_of(model, {"ab": 3}) == []
