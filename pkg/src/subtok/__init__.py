"""Subword tokenization toolkit: BPE, WordPiece, and unigram-LM trainers
with a shared evaluation harness (NSL, fertility, PCW, timing)."""

__version__ = "0.1.0"

from .baselines import (
    BASELINE_KINDS,
    BaselineTokenizer,
    encode_baseline,
    load_baseline,
    load_rank_file,
    load_vocab_merges,
)
from .bpe import (
    BpeConfig,
    BpeModel,
    MergeTable,
    decode_bpe,
    encode_bpe,
    encode_word_bpe,
    load_bpe,
    save_bpe,
    train_bpe,
)
from .corpus import (
    MARKER_TOKENS,
    TSHEG,
    Corpus,
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
from .errors import DataError, SubtokError, UsageError
from .metrics import (
    BenchResult,
    EvalEntry,
    MetricsReport,
    bench,
    build_report,
    evaluate,
    fertility,
    fertility_raw,
    format_fixed,
    format_timing,
    nsl,
    nsl_per_line,
    pcw,
)
from .tokens import TokenSeq, Vocab, WordSpan
from .unigram import (
    UnigramConfig,
    UnigramModel,
    decode_unigram,
    em_step,
    encode_unigram,
    encode_word_unigram,
    load_unigram,
    prune,
    save_unigram,
    seed_vocab,
    train_unigram,
    viterbi_segment,
)
from .wordpiece import (
    WordPieceConfig,
    WordPieceModel,
    decode_wordpiece,
    encode_word_wordpiece,
    encode_wordpiece,
    load_wordpiece,
    save_wordpiece,
    train_wordpiece,
    unk_word_indices,
)

__all__ = [
    "__version__",
    "BASELINE_KINDS",
    "BaselineTokenizer",
    "encode_baseline",
    "load_baseline",
    "load_rank_file",
    "load_vocab_merges",
    "BpeConfig",
    "BpeModel",
    "MergeTable",
    "train_bpe",
    "encode_bpe",
    "encode_word_bpe",
    "decode_bpe",
    "save_bpe",
    "load_bpe",
    "MARKER_TOKENS",
    "TSHEG",
    "Corpus",
    "PretokenPolicy",
    "WordCounts",
    "normalize",
    "load_corpus",
    "serialize_corpus",
    "split_with_delims",
    "pretokenize",
    "extract_words",
    "count_words",
    "concat_words",
    "expand_words",
    "load_dataset",
    "dedupe",
    "SubtokError",
    "UsageError",
    "DataError",
    "BenchResult",
    "EvalEntry",
    "MetricsReport",
    "bench",
    "build_report",
    "evaluate",
    "fertility",
    "fertility_raw",
    "format_fixed",
    "format_timing",
    "nsl",
    "nsl_per_line",
    "pcw",
    "TokenSeq",
    "Vocab",
    "WordSpan",
    "UnigramConfig",
    "UnigramModel",
    "train_unigram",
    "seed_vocab",
    "em_step",
    "viterbi_segment",
    "prune",
    "encode_unigram",
    "encode_word_unigram",
    "decode_unigram",
    "save_unigram",
    "load_unigram",
    "WordPieceConfig",
    "WordPieceModel",
    "train_wordpiece",
    "encode_wordpiece",
    "encode_word_wordpiece",
    "decode_wordpiece",
    "save_wordpiece",
    "load_wordpiece",
    "unk_word_indices",
]
