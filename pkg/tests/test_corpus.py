import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subtok.corpus import (
    MARKER_TOKENS,
    TSHEG,
    PretokenPolicy,
    WordCounts,
    concat_words,
    count_words,
    dedupe,
    expand_words,
    extract_words,
    load_corpus,
    load_dataset,
    normalize,
    pretokenize,
    serialize_corpus,
    split_with_delims,
)
from subtok.errors import DataError
from subtok.tokens import TokenSeq, Vocab, WordSpan, byte_token, byte_token_value, bytes_to_tokens

WS = PretokenPolicy()
NONE_WS = PretokenPolicy(normalization="none")
TS = PretokenPolicy(mode="tsheg_syllable")
BL = PretokenPolicy(mode="byte_level_regex")


class TestPolicy:
    def test_defaults(self):
        assert WS.mode == "whitespace"
        assert WS.normalization == "NFC"
        assert WS.lowercase is False

    def test_bad_mode_rejected(self):
        with pytest.raises(DataError):
            PretokenPolicy(mode="sentence")

    def test_bad_normalization_rejected(self):
        with pytest.raises(DataError):
            PretokenPolicy(normalization="NFKD")

    def test_normalize_nfc_composes(self):
        decomposed = "é"  # e + combining acute
        assert normalize(decomposed, WS) == "é"
        assert normalize(decomposed, NONE_WS) == decomposed

    def test_lowercase(self):
        policy = PretokenPolicy(lowercase=True)
        assert normalize("AbC", policy) == "abc"


class TestSplitWithDelims:
    def test_whitespace_basic(self):
        words, delims = split_with_delims("ab  cd", WS)
        assert words == ["ab", "cd"]
        assert delims == ["", "  ", ""]

    def test_leading_trailing(self):
        words, delims = split_with_delims("  ab ", WS)
        assert words == ["ab"]
        assert delims == ["  ", " "]

    def test_empty(self):
        assert split_with_delims("", WS) == ([], [""])

    def test_only_spaces(self):
        assert split_with_delims("   ", WS) == ([], ["   "])

    def test_tsheg_closes_word(self):
        text = f"ab{TSHEG}cd{TSHEG} ef"
        words, delims = split_with_delims(text, TS)
        assert words == [f"ab{TSHEG}", f"cd{TSHEG}", "ef"]
        assert delims == ["", "", " ", ""]

    def test_tsheg_mode_in_whitespace_mode_not_split(self):
        words, _ = split_with_delims(f"ab{TSHEG}cd", WS)
        assert words == [f"ab{TSHEG}cd"]

    def test_byte_level_attaches_leading_space(self):
        words, delims = split_with_delims("hello world", BL)
        assert words == ["hello", " world"]
        assert delims == ["", "", ""]
        assert "".join(words) == "hello world"

    def test_delims_length_invariant(self):
        for text in ("", "a", " a ", "a b  c", "\t\n", f"{TSHEG}{TSHEG}a"):
            for policy in (WS, TS):
                words, delims = split_with_delims(text, policy)
                assert len(delims) == len(words) + 1

    @given(st.text(alphabet="ab \t" + TSHEG, max_size=30))
    @settings(max_examples=200)
    def test_reconstruction_property(self, text):
        for policy in (NONE_WS, PretokenPolicy(mode="tsheg_syllable", normalization="none")):
            words, delims = split_with_delims(text, policy)
            rebuilt = delims[0] + "".join(
                w + d for w, d in zip(words, delims[1:])
            )
            assert rebuilt == text

    @given(st.text(max_size=30))
    @settings(max_examples=200)
    def test_byte_level_reconstruction(self, text):
        policy = PretokenPolicy(mode="byte_level_regex", normalization="none")
        words, delims = split_with_delims(text, policy)
        assert "".join(words) == text
        assert all(d == "" for d in delims)


class TestCorpusIO:
    def test_load_counts_and_roundtrip(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("ab cd\nef\n", encoding="utf-8")
        corpus = load_corpus(p, NONE_WS)
        assert corpus.documents == ["ab cd", "ef"]
        assert corpus.char_count == len("ab cd") + len("ef")
        assert corpus.trailing_newline
        assert serialize_corpus(corpus) == "ab cd\nef\n"

    def test_no_trailing_newline(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("ab", encoding="utf-8")
        corpus = load_corpus(p, NONE_WS)
        assert corpus.documents == ["ab"]
        assert not corpus.trailing_newline
        assert serialize_corpus(corpus) == "ab"

    def test_lone_newline_roundtrip(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_bytes(b"\n")
        corpus = load_corpus(p, NONE_WS)
        assert serialize_corpus(corpus) == "\n"

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_bytes(b"")
        corpus = load_corpus(p, NONE_WS)
        assert corpus.documents == []
        assert serialize_corpus(corpus) == ""

    def test_invalid_utf8_reports_offset(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_bytes(b"ok\n\xff\xfe")
        with pytest.raises(DataError, match="byte offset 3"):
            load_corpus(p, NONE_WS)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_corpus(tmp_path / "nope.txt", WS)


class TestWordCounts:
    def test_count_words(self):
        wc = count_words("ab ab cd", NONE_WS)
        assert wc.entries == {"ab": 2, "cd": 1}
        assert wc.total_words == 3
        assert wc.distinct_words == 2

    def test_rejects_empty_word(self):
        with pytest.raises(DataError):
            WordCounts({"": 1})

    def test_rejects_zero_count(self):
        with pytest.raises(DataError):
            WordCounts({"a": 0})

    def test_dedupe(self):
        wc = dedupe(WordCounts({"a": 5, "b": 2}))
        assert wc.entries == {"a": 1, "b": 1}

    def test_concat_and_expand(self):
        wc = WordCounts({"x": 2, "y": 1})
        assert concat_words(wc) == "x x y"
        assert expand_words(wc) == ["x", "x", "y"]
        assert pretokenize(concat_words(wc), NONE_WS) == expand_words(wc)


class TestDataset:
    def test_markers_dropped(self):
        tokens = ["beg", "ab", "mid", "cd", "#", "*", "NUM", "ab", "end"]
        wc = extract_words(tokens)
        assert wc.entries == {"ab": 2, "cd": 1}

    def test_marker_set(self):
        assert MARKER_TOKENS == {"beg", "end", "mid", "#", "*", "NUM"}

    def test_load_dataset(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("beg ab cd\nend\tef\n", encoding="utf-8")
        assert load_dataset(p) == ["beg", "ab", "cd", "end", "ef"]

    def test_load_dataset_bad_utf8(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_bytes(b"\xff")
        with pytest.raises(DataError):
            load_dataset(p)


class TestTokens:
    def test_byte_token_roundtrip(self):
        for n in (0, 65, 255):
            assert byte_token_value(byte_token(n)) == n
        assert byte_token(65) == "<0x41>"
        assert byte_token_value("<0x41>") == 65
        assert byte_token_value("plain") is None
        assert byte_token_value("<0x4G>") is None

    def test_bytes_to_tokens(self):
        assert bytes_to_tokens(b"\x00\xff") == ["<0x00>", "<0xFF>"]

    def test_vocab_lookup(self):
        v = Vocab(["<unk>", "a", "b"], n_reserved=1)
        assert v.id_of("a") == 1
        assert v.piece_of(2) == "b"
        assert "a" in v and "z" not in v
        with pytest.raises(DataError):
            v.id_of("z")
        with pytest.raises(DataError):
            v.piece_of(3)

    def test_vocab_duplicate_rejected(self):
        with pytest.raises(DataError):
            Vocab(["a", "a"])

    def test_token_seq_validate(self):
        seq = TokenSeq(
            ids=[1, 2, 3],
            pieces=["a", "b", "c"],
            word_spans=[WordSpan(0, 0, 2), WordSpan(1, 2, 1)],
            words=["ab", "c"],
        )
        seq.validate()
        assert seq.token_count() == 3

    def test_token_seq_sum_invariant_violation(self):
        seq = TokenSeq(
            ids=[1, 2, 3],
            pieces=["a", "b", "c"],
            word_spans=[WordSpan(0, 0, 2)],
            words=["ab"],
        )
        with pytest.raises(DataError):
            seq.validate()

    def test_token_seq_zero_count_span(self):
        seq = TokenSeq(
            ids=[1],
            pieces=["a"],
            word_spans=[WordSpan(0, 0, 0), WordSpan(1, 0, 1)],
            words=["", "a"],
        )
        with pytest.raises(DataError):
            seq.validate()
