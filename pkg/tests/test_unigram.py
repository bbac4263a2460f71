import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subtok.corpus import PretokenPolicy, WordCounts
from subtok.errors import DataError
from subtok.tokens import all_byte_tokens
from subtok.unigram import (
    BYTE_PIECE_LOG_PROB,
    NEG_INF,
    UnigramConfig,
    UnigramModel,
    decode_unigram,
    em_step,
    encode_unigram,
    encode_word_unigram,
    finalize,
    load_unigram,
    prune,
    save_unigram,
    seed_vocab,
    train_unigram,
    viterbi_segment,
)

from reference_impls import best_segmentation, enumerate_em_counts

NONE_WS = PretokenPolicy(normalization="none")


def wc(entries):
    return WordCounts(dict(entries))


def lm(pieces, **kwargs):
    """Model over explicit log-probs; chars of the pieces are required."""
    required = {ch for p in pieces for ch in p}
    return UnigramModel(pieces=dict(pieces), required_chars=required, **kwargs)


class TestSeed:
    def test_chars_always_included(self):
        model = seed_vocab(wc({"ab": 3, "cd": 1}), 4)
        assert set(model.pieces) == {"a", "b", "c", "d"}

    def test_multi_ranked_by_mass(self):
        # "ab" freq 5 len 2 -> 10; "abc" freq 1 len 3 -> 3; "bc" freq 1 -> 2
        model = seed_vocab(wc({"ab": 4, "abc": 1}), 4)
        multi = [p for p in model.pieces if len(p) > 1]
        assert multi == ["ab"]

    def test_normalized(self):
        model = seed_vocab(wc({"ab": 3, "ba": 2}), 6)
        assert model.normalization_error() < 1e-12

    def test_reserved_surfaces_excluded(self):
        model = seed_vocab(wc({"ab": 9}), 3, reserved_surfaces={"ab"})
        assert "ab" not in model.pieces

    def test_seed_size_below_charset_rejected(self):
        with pytest.raises(DataError):
            seed_vocab(wc({"abcdef": 1}), 3)

    def test_coverage_drops_rare_chars(self):
        counts = wc({"aa": 90, "az": 1})
        model = seed_vocab(counts, 8, coverage=0.95)
        assert "z" not in model.pieces
        assert "z" not in model.required_chars

    def test_max_piece_length_cap(self):
        model = seed_vocab(wc({"abcde": 10}), 30, max_piece_length=2)
        assert max(len(p) for p in model.pieces) <= 2


class TestEmStep:
    def test_fixed_point_half_half(self):
        model = lm({"a": math.log(0.5), "aa": math.log(0.5)})
        new, ll = em_step(model, wc({"aa": 1}))
        # paths: [aa] p=.5 and [a,a] p=.25; posterior 2/3 vs 1/3
        # E[aa]=2/3, E[a]=2*1/3; M-step renormalizes back to (.5, .5)
        assert ll == pytest.approx(math.log(0.75))
        assert new.pieces["a"] == pytest.approx(math.log(0.5))
        assert new.pieces["aa"] == pytest.approx(math.log(0.5))

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_path_enumeration(self, seed):
        rng = random.Random(seed)
        alphabet = "ab"
        entries = {}
        for _ in range(rng.randint(1, 5)):
            word = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 5)))
            entries[word] = entries.get(word, 0) + rng.randint(1, 3)
        counts = wc(entries)

        subs = {w[i:j] for w in entries for i in range(len(w)) for j in range(i + 1, len(w) + 1)}
        pieces = sorted(subs)
        raw = [rng.uniform(0.2, 1.0) for _ in pieces]
        total = sum(raw)
        model = lm({p: math.log(r / total) for p, r in zip(pieces, raw)})

        expected_counts, expected_ll = enumerate_em_counts(entries, model.pieces)
        new, ll = em_step(model, counts)
        assert ll == pytest.approx(expected_ll, abs=1e-9)
        total_e = sum(expected_counts.values())
        for piece, e in expected_counts.items():
            if e == 0:
                assert new.pieces[piece] == NEG_INF
            else:
                assert new.pieces[piece] == pytest.approx(math.log(e / total_e), abs=1e-9)

    def test_monotone_over_iterations(self):
        counts = wc({"abab": 3, "ab": 5, "ba": 2, "a": 4})
        model = seed_vocab(counts, 8)
        prev = -math.inf
        for _ in range(6):
            model, ll = em_step(model, counts)
            assert ll >= prev - 1e-9
            prev = ll

    def test_uncoverable_word_rejected(self):
        model = lm({"a": math.log(1.0)})
        with pytest.raises(DataError):
            em_step(model, wc({"ab": 1}))


class TestViterbi:
    def test_prefers_higher_probability(self):
        model = lm({"a": math.log(0.1), "b": math.log(0.1), "ab": math.log(0.8)})
        pieces, score = viterbi_segment(model, "ab")
        assert pieces == ["ab"]
        assert score == pytest.approx(math.log(0.8))

    def test_tie_prefers_fewer_pieces(self):
        model = lm({"a": -1.0, "b": -2.0, "ab": -3.0})
        pieces, score = viterbi_segment(model, "ab")
        assert pieces == ["ab"]
        assert score == -3.0

    def test_tie_prefers_leftmost_longest(self):
        model = lm({"a": -1.0, "aa": -2.0, "ab": -2.0, "b": -1.0})
        pieces, _ = viterbi_segment(model, "aab")
        assert pieces == ["aa", "b"]

    def test_unsegmentable_word_rejected(self):
        # callers split words into coverable runs first, so the DP treats an
        # uncoverable word as a contract violation
        model = lm({"a": -1.0})
        with pytest.raises(DataError):
            viterbi_segment(model, "ab")

    def test_max_piece_length_respected(self):
        model = lm({"ab": -1.0, "a": -2.0, "b": -2.0}, max_piece_length=1)
        pieces, score = viterbi_segment(model, "ab")
        assert pieces == ["a", "b"]
        assert score == -4.0

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_exhaustive_enumeration(self, seed):
        rng = random.Random(100 + seed)
        word = "".join(rng.choice("abc") for _ in range(rng.randint(1, 8)))
        subs = sorted(
            {word[i:j] for i in range(len(word)) for j in range(i + 1, len(word) + 1)}
        )
        keep = [s for s in subs if len(s) == 1 or rng.random() < 0.6]
        log_probs = {p: rng.uniform(-5.0, -0.5) for p in keep}
        model = lm(log_probs)

        expected_pieces, expected_score = best_segmentation(word, log_probs)
        pieces, score = viterbi_segment(model, word)
        assert score == expected_score
        assert pieces == expected_pieces


class TestPrune:
    def test_single_chars_never_removed(self):
        counts = wc({"ab": 5, "ba": 3})
        model = seed_vocab(counts, 8)
        model, _ = em_step(model, counts)
        # prune to exactly the single-character floor
        pruned = prune(model, counts, 2 / len(model.pieces))
        assert set(pruned.pieces) == {"a", "b"}

    def test_pruning_below_single_char_floor_rejected(self):
        counts = wc({"ab": 5, "ba": 3})
        model = seed_vocab(counts, 8)
        with pytest.raises(DataError):
            prune(model, counts, 0.01)

    def test_keeps_requested_count(self):
        counts = wc({"abab": 4, "ab": 3})
        model = seed_vocab(counts, 10)
        model, _ = em_step(model, counts)
        pruned = prune(model, counts, 0.5)
        assert len(pruned.pieces) == math.ceil(len(model.pieces) * 0.5)

    def test_low_loss_pieces_dropped_first(self):
        # "junk" piece with tiny probability that no viterbi path uses
        counts = wc({"abab": 6})
        model = seed_vocab(counts, 8)
        model, _ = em_step(model, counts)
        useless = [p for p, lp in model.pieces.items() if lp == NEG_INF and len(p) > 1]
        if useless:
            pruned = prune(model, counts, 0.75)
            assert not (set(useless) & set(pruned.pieces))

    def test_renormalizes(self):
        counts = wc({"abab": 4, "ab": 3, "ba": 2})
        model = seed_vocab(counts, 10)
        model, _ = em_step(model, counts)
        pruned = prune(model, counts, 0.6)
        assert pruned.normalization_error() < 1e-9

    def test_keep_fraction_validated(self):
        counts = wc({"ab": 2})
        model = seed_vocab(counts, 4)
        with pytest.raises(DataError):
            prune(model, counts, 0.0)
        with pytest.raises(DataError):
            prune(model, counts, 1.5)


class TestTrain:
    def test_reaches_target_and_layout(self):
        counts = wc({"abab": 9, "ab": 6, "baba": 4, "bb": 3})
        cfg = UnigramConfig(specials=("<unk>",), unk_token="<unk>", byte_fallback=True)
        model = train_unigram(counts, 262, cfg)
        vocab = model.vocab
        assert vocab is not None
        assert len(vocab) == 262
        assert vocab.pieces[0] == "<unk>"
        assert vocab.pieces[1:257] == all_byte_tokens()
        lm_block = vocab.pieces[257:]
        assert set(lm_block) == set(model.pieces)
        expected_order = [p for _, p in sorted((-lp, p) for p, lp in model.pieces.items())]
        assert lm_block == expected_order

    def test_deterministic(self):
        counts = wc({"abab": 9, "ab": 6, "baba": 4})
        cfg = UnigramConfig(byte_fallback=False)
        a = train_unigram(counts, 8, cfg)
        b = train_unigram(counts, 8, cfg)
        assert a.pieces == b.pieces
        assert a.vocab.pieces == b.vocab.pieces

    def test_normalized_after_training(self):
        counts = wc({"abc": 5, "ab": 4, "bc": 3, "c": 2})
        model = train_unigram(counts, 10, UnigramConfig(byte_fallback=False))
        assert model.normalization_error() < 1e-9

    def test_target_below_charset_rejected(self):
        counts = wc({"abcdef": 2})
        with pytest.raises(DataError):
            train_unigram(counts, 3, UnigramConfig(byte_fallback=False))


class TestEncodeDecode:
    @pytest.fixture()
    def model(self):
        counts = wc({"abab": 9, "ab": 6, "baba": 4, "bb": 3})
        return train_unigram(counts, 262, UnigramConfig(byte_fallback=True))

    def test_known_word_viterbi(self, model):
        ids, pieces = encode_word_unigram(model, "abab")
        assert "".join(pieces) == "abab"
        assert [model.vocab.piece_of(i) for i in ids] == pieces

    def test_unknown_chars_fall_back_to_bytes(self, model):
        _, pieces = encode_word_unigram(model, "axb")
        assert "<0x78>" in pieces

    def test_multibyte_fallback_and_decode(self, model):
        text = "ab བོ ab"
        seq = encode_unigram(model, text, NONE_WS, keep_delims=True)
        assert decode_unigram(model, seq.ids) == text

    def test_unk_token_instead_of_bytes(self):
        counts = wc({"ab": 5})
        cfg = UnigramConfig(specials=("<unk>",), unk_token="<unk>", byte_fallback=False)
        model = train_unigram(counts, 5, cfg)
        # without byte fallback the whole word collapses to the unk token
        ids, pieces = encode_word_unigram(model, "azb")
        assert pieces == ["<unk>"]
        assert ids == [model.vocab.id_of("<unk>")]

    def test_no_fallback_no_unk_raises(self):
        counts = wc({"ab": 5})
        model = train_unigram(counts, 4, UnigramConfig(byte_fallback=False))
        with pytest.raises(DataError):
            encode_word_unigram(model, "az")

    def test_eval_mode_records_delims(self, model):
        seq = encode_unigram(model, " ab  ba ", NONE_WS)
        assert seq.words == ["ab", "ba"]
        assert seq.delims == [" ", "  ", " "]

    @given(st.text(max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_roundtrip_property(self, text):
        counts = wc({"ab": 5, "ba": 3})
        model = train_unigram(counts, 260, UnigramConfig(byte_fallback=True))
        seq = encode_unigram(model, text, NONE_WS, keep_delims=True)
        assert decode_unigram(model, seq.ids) == text


class TestSaveLoad:
    def test_roundtrip_exact(self, tmp_path):
        counts = wc({"abab": 9, "ab": 6, "bb": 3})
        cfg = UnigramConfig(specials=("<unk>",), unk_token="<unk>")
        model = train_unigram(counts, 262, cfg)
        path = tmp_path / "unigram.tsv"
        save_unigram(model, path)
        loaded = load_unigram(path)
        assert loaded.pieces == model.pieces
        assert loaded.byte_fallback is True
        assert loaded.specials == ["<unk>"]
        assert loaded.vocab.pieces == model.vocab.pieces
        for word in ("abab", "ba", "zq"):
            assert encode_word_unigram(loaded, word) == encode_word_unigram(model, word)

    def test_header(self, tmp_path):
        model = train_unigram(wc({"ab": 4}), 259, UnigramConfig())
        save_unigram(model, tmp_path / "u.tsv")
        first = (tmp_path / "u.tsv").read_text(encoding="utf-8").splitlines()[0]
        assert first.startswith("#!")
        assert "unigram" in first

    def test_positive_log_prob_rejected(self, tmp_path):
        path = tmp_path / "u.tsv"
        path.write_text("#! unigram v1\na\t0.5\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_unigram(path)

    def test_byte_rows_round_trip_as_fallback(self, tmp_path):
        model = train_unigram(wc({"ab": 4}), 259, UnigramConfig(byte_fallback=True))
        save_unigram(model, tmp_path / "u.tsv")
        body = (tmp_path / "u.tsv").read_text(encoding="utf-8")
        assert "<0x00>" in body
        loaded = load_unigram(tmp_path / "u.tsv")
        assert loaded.byte_fallback is True
        assert all(len(p) >= 1 and not p.startswith("<0x") for p in loaded.pieces)
