"""Command-line front door: train, encode, eval, bench.

Conventions: logs go to stderr, data to stdout. Exit codes: 0 success,
1 usage error, 2 data/validation error, 3 internal error. Every report
embeds the argv it was produced with, so runs can be replayed verbatim.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import __version__
from .baselines import BASELINE_KINDS, BaselineTokenizer, load_baseline
from .bpe import (
    BpeConfig,
    decode_bpe,
    encode_bpe,
    load_bpe,
    save_bpe,
    train_bpe,
)
from .corpus import (
    PretokenPolicy,
    concat_words,
    count_words,
    dedupe,
    extract_words,
    load_corpus,
    load_dataset,
)
from .errors import DataError, SubtokError, UsageError
from .metrics import (
    EvalEntry,
    TokenizerRun,
    bench,
    build_report,
    evaluate,
    format_timing,
    nsl_per_line,
    text_fingerprint,
)
from .tokens import TokenSeq, WordSpan
from .unigram import (
    UnigramConfig,
    decode_unigram,
    encode_unigram,
    load_unigram,
    save_unigram,
    train_unigram,
)
from .wordpiece import (
    WordPieceConfig,
    decode_wordpiece,
    encode_wordpiece,
    load_wordpiece,
    save_wordpiece,
    train_wordpiece,
)

ALGORITHMS = ("bpe", "wordpiece", "unigram")


@dataclass(frozen=True)
class RunConfig:
    """Reproducibility record serialized into reports and model metadata."""

    algorithm: str
    vocab_size: int
    corpus_path: str | None
    dataset_path: str | None
    policy: PretokenPolicy
    seed: int
    output_dir: str | None

    def as_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "vocab_size": self.vocab_size,
            "corpus_path": self.corpus_path,
            "dataset_path": self.dataset_path,
            "policy": self.policy.as_dict(),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def parse_policy(spec: str | None) -> PretokenPolicy:
    """Parse 'mode=...,normalization=...,lowercase=...' into a policy."""
    if not spec:
        return PretokenPolicy()
    kwargs: dict = {}
    for part in spec.split(","):
        if not part:
            continue
        if "=" not in part:
            raise UsageError(f"--policy entries must be key=value, got {part!r}")
        key, value = part.split("=", 1)
        if key in ("mode", "normalization"):
            kwargs[key] = value
        elif key == "lowercase":
            if value not in ("true", "false"):
                raise UsageError(f"--policy lowercase must be true or false, got {value!r}")
            kwargs[key] = value == "true"
        else:
            raise UsageError(f"unknown --policy key {key!r}")
    try:
        return PretokenPolicy(**kwargs)
    except DataError as exc:
        raise UsageError(str(exc)) from exc


class ModelHandle:
    """A loaded model behind a uniform encode/decode facade."""

    def __init__(self, algorithm: str, model, name: str):
        self.algorithm = algorithm
        self.model = model
        self.name = name

    def vocab_size(self) -> int:
        return len(self.model.vocab.pieces)

    def encode(
        self, text: str, policy: PretokenPolicy, keep_delims: bool = False
    ) -> TokenSeq:
        if self.algorithm == "bpe":
            return encode_bpe(self.model, text, policy, keep_delims)
        if self.algorithm == "wordpiece":
            return encode_wordpiece(self.model, text, policy, keep_delims)
        return encode_unigram(self.model, text, policy, keep_delims)

    def decode(self, ids) -> str:
        if self.algorithm == "bpe":
            return decode_bpe(self.model, ids)
        if self.algorithm == "wordpiece":
            return decode_wordpiece(self.model, ids)
        return decode_unigram(self.model, ids)


def load_model(model_dir: str | Path) -> ModelHandle:
    model_dir = Path(model_dir)
    meta_path = model_dir / "meta.json"
    if not meta_path.is_file():
        raise DataError(f"{model_dir} is not a model directory (no meta.json)")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {meta_path}: {exc}") from exc
    algorithm = meta.get("algorithm")
    if algorithm == "bpe":
        model = load_bpe(model_dir)
    elif algorithm == "wordpiece":
        model = load_wordpiece(model_dir / "vocab.txt")
    elif algorithm == "unigram":
        model = load_unigram(model_dir / "unigram.tsv")
        unk = meta.get("options", {}).get("unk_token")
        if unk is not None:
            model.unk_token = unk
    else:
        raise DataError(f"{meta_path}: unknown algorithm {algorithm!r}")
    return ModelHandle(algorithm, model, model_dir.name)


def parse_baseline_spec(spec: str) -> tuple[str, str | None, str]:
    """'kind:path' (or bare 'pure_byte') -> (kind, path, display name)."""
    if ":" in spec:
        kind, _, path = spec.partition(":")
    else:
        kind, path = spec, None
    if kind not in BASELINE_KINDS:
        raise UsageError(
            f"unknown baseline kind {kind!r}; expected one of {', '.join(BASELINE_KINDS)}"
        )
    if kind != "pure_byte" and not path:
        raise UsageError(f"baseline kind {kind!r} requires kind:path")
    name = Path(path).stem if path else kind
    return kind, path, name


def _log(message: str) -> None:
    print(message, file=sys.stderr)


# --- train ---------------------------------------------------------------


def _build_trainer(args, wc) -> Callable[[], object]:
    specials = tuple(args.special)
    byte_fallback = args.byte_fallback == "on"
    if args.algo == "bpe":
        config = BpeConfig(
            min_frequency=args.min_frequency,
            byte_fallback=byte_fallback,
            specials=specials,
            unk_token=args.unk,
            mode=args.bpe_mode,
        )
        return lambda: train_bpe(wc, args.vocab_size, config)
    if args.algo == "wordpiece":
        unk = args.unk if args.unk is not None else "[UNK]"
        if unk not in specials:
            specials = (unk,) + specials
        config = WordPieceConfig(specials=specials, unk_token=unk)
        return lambda: train_wordpiece(wc, args.vocab_size, config)
    config = UnigramConfig(
        max_piece_length=args.max_piece_length,
        coverage=args.coverage,
        specials=specials,
        unk_token=args.unk,
        byte_fallback=byte_fallback,
    )
    return lambda: train_unigram(wc, args.vocab_size, config)


def _options_echo(args) -> dict:
    out = {
        "min_frequency": args.min_frequency,
        "byte_fallback": args.byte_fallback == "on",
        "specials": list(args.special),
        "unk_token": args.unk,
        "dedupe": args.dedupe,
    }
    if args.algo == "bpe":
        out["mode"] = args.bpe_mode
    if args.algo == "unigram":
        out["max_piece_length"] = args.max_piece_length
        out["coverage"] = args.coverage
    return out


def cmd_train(args, argv: list[str]) -> int:
    policy = parse_policy(args.policy)
    corpus = load_corpus(args.corpus, policy)
    wc = count_words(corpus, policy)
    if args.dedupe:
        wc = dedupe(wc)
    if wc.total_words == 0:
        raise DataError("corpus contains no words under this policy")
    train_once = _build_trainer(args, wc)

    if args.runs < 1 or args.loops < 1:
        raise UsageError("--runs and --loops must be >= 1")
    per_loop: list[float] = []
    model = None
    for _ in range(args.runs):
        start = time.perf_counter()
        for _ in range(args.loops):
            trained = train_once()
        elapsed = time.perf_counter() - start
        per_loop.append(elapsed / args.loops)
        if model is None:
            model = trained
        elif trained != model:
            raise DataError("training produced different models across timing runs")
    mean = math.fsum(per_loop) / args.runs
    variance = math.fsum((x - mean) ** 2 for x in per_loop) / args.runs
    line = format_timing(mean, math.sqrt(variance), args.runs, args.loops)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.algo == "bpe":
        save_bpe(model, out_dir)
    elif args.algo == "wordpiece":
        save_wordpiece(model, out_dir / "vocab.txt")
    else:
        save_unigram(model, out_dir / "unigram.tsv")

    run_config = RunConfig(
        algorithm=args.algo,
        vocab_size=args.vocab_size,
        corpus_path=str(args.corpus),
        dataset_path=None,
        policy=policy,
        seed=args.seed,
        output_dir=str(out_dir),
    )
    meta_path = out_dir / "meta.json"
    meta = {}
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    # Timing stays out of meta.json so identical configs write identical files.
    meta.update(
        {
            "format": "subtok-model/v1",
            "algorithm": args.algo,
            "version": __version__,
            "command": argv,
            "run_config": run_config.as_dict(),
            "options": _options_echo(args),
            "corpus_stats": {
                "documents": len(corpus.documents),
                "chars": corpus.char_count,
                "total_words": wc.total_words,
                "distinct_words": wc.distinct_words,
            },
        }
    )
    meta_path.write_text(
        json.dumps(meta, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    _log(f"model written to {out_dir}")
    print(line)
    return 0


# --- encode --------------------------------------------------------------


def cmd_encode(args, argv: list[str]) -> int:
    if bool(args.model) == bool(args.baseline):
        raise UsageError("encode needs exactly one of --model or --baseline")
    policy = parse_policy(args.policy)
    if args.model:
        handle: ModelHandle | BaselineTokenizer = load_model(args.model)
    else:
        kind, path, _name = parse_baseline_spec(args.baseline)
        handle = load_baseline(kind, path)
        if args.decode:
            raise UsageError("--decode requires --model")

    # Byte-faithful I/O: invalid UTF-8 crosses as surrogate escapes so that
    # byte-fallback models can round-trip arbitrary streams.
    if args.input:
        try:
            text = Path(args.input).read_text(encoding="utf-8", errors="surrogateescape")
        except OSError as exc:
            raise DataError(f"cannot read {args.input}: {exc}") from exc
    else:
        text = sys.stdin.buffer.read().decode("utf-8", errors="surrogateescape")

    outputs: list[str] = []
    for line in text.split("\n"):
        if args.decode:
            try:
                ids = [int(tok) for tok in line.split()]
            except ValueError as exc:
                raise DataError(f"decode input must be integer ids: {exc}") from exc
            outputs.append(handle.decode(ids))  # type: ignore[union-attr]
        else:
            seq = handle.encode(line, policy, keep_delims=not args.drop_delims)
            if args.json:
                outputs.append(
                    json.dumps(
                        {"ids": seq.ids, "pieces": seq.pieces}, ensure_ascii=False
                    )
                )
            elif args.pieces:
                outputs.append(" ".join(seq.pieces))
            else:
                outputs.append(" ".join(str(i) for i in seq.ids))
    sys.stdout.buffer.write("\n".join(outputs).encode("utf-8", "surrogateescape"))
    sys.stdout.buffer.flush()
    return 0


# --- eval / bench --------------------------------------------------------


def _collect_entries(args) -> list[EvalEntry]:
    entries: list[EvalEntry] = []
    for model_dir in args.model:
        handle = load_model(model_dir)
        entries.append(
            EvalEntry(
                name=handle.name,
                encode=lambda t, p, h=handle: h.encode(t, p),
                vocab_size=handle.vocab_size(),
                is_baseline=False,
            )
        )
    for spec in args.baseline:
        kind, path, name = parse_baseline_spec(spec)
        baseline = load_baseline(kind, path)
        entries.append(
            EvalEntry(
                name=name,
                encode=lambda t, p, b=baseline: b.encode(t, p),
                vocab_size=baseline.vocab_size(),
                is_baseline=True,
            )
        )
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise DataError(f"duplicate tokenizer names: {sorted(names)}")
    if not entries:
        raise UsageError("need at least one --model or --baseline")
    return entries


def _eval_words(args):
    tokens = load_dataset(args.dataset)
    wc = extract_words(tokens)
    if args.dedupe:
        wc = dedupe(wc)
    if wc.total_words == 0:
        raise DataError("evaluation dataset contains no words")
    return wc


def _concat_seqs(seqs: list[TokenSeq]) -> TokenSeq:
    ids: list[int] = []
    pieces: list[str] = []
    spans: list[WordSpan] = []
    words: list[str] = []
    for seq in seqs:
        tok_off = len(ids)
        word_off = len(words)
        ids.extend(seq.ids)
        pieces.extend(seq.pieces)
        spans.extend(
            WordSpan(s.word_index + word_off, s.token_start + tok_off, s.token_count)
            for s in seq.word_spans
        )
        words.extend(seq.words)
    return TokenSeq(ids, pieces, spans, words, None)


def _config_echo(args, argv: list[str]) -> dict:
    return {
        "argv": argv,
        "dataset": str(args.dataset),
        "policy": parse_policy(args.policy).as_dict(),
        "models": list(args.model),
        "baselines": list(args.baseline),
        "dedupe": args.dedupe,
        "version": __version__,
    }


def cmd_eval(args, argv: list[str]) -> int:
    policy = parse_policy(args.policy)
    entries = _collect_entries(args)
    wc = _eval_words(args)
    echo = _config_echo(args, argv)
    echo["nsl_mode"] = args.nsl_mode

    if args.nsl_mode == "per_line":
        report = _eval_per_line(args, entries, policy, echo)
    else:
        text = concat_words(wc)
        report = evaluate(
            entries,
            text,
            policy,
            config=echo,
            run_bench=not args.no_bench,
            runs=args.runs,
            loops=args.loops,
        )
    for name, message in report.errors.items():
        _log(f"tokenizer {name} failed: {message}")
    if not report.candidates:
        raise DataError("every tokenizer failed on this dataset")

    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        _log(f"report written to {args.out}")
    if args.csv:
        Path(args.csv).write_text(report.to_csv_matrix(), encoding="utf-8")
        _log(f"NSL matrix written to {args.csv}")
    if args.format == "json":
        print(report.to_json())
    elif args.format == "csv":
        sys.stdout.write(report.to_csv_matrix())
    else:
        sys.stdout.write(report.to_table())
    return 0


def _eval_per_line(args, entries: list[EvalEntry], policy: PretokenPolicy, echo: dict):
    """Per-line NSL variant: encode each dataset line separately, average
    the per-line ratios; the other metrics use the concatenated spans."""
    try:
        raw = Path(args.dataset).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {args.dataset}: {exc}") from exc
    line_texts: list[str] = []
    for line in raw.split("\n"):
        line_wc = extract_words(line.split())
        if args.dedupe:
            line_wc = dedupe(line_wc)
        if line_wc.total_words:
            line_texts.append(concat_words(line_wc))
    if not line_texts:
        raise DataError("evaluation dataset contains no words")
    full_text = " ".join(line_texts)
    text_id = text_fingerprint(full_text)

    runs: list[TokenizerRun] = []
    line_seqs: dict[str, list[TokenSeq]] = {}
    for entry in entries:
        run = TokenizerRun(
            name=entry.name,
            text_id=text_id,
            vocab_size=entry.vocab_size,
            is_baseline=entry.is_baseline,
        )
        try:
            seqs = [entry.encode(t, policy) for t in line_texts]
            run.seq = _concat_seqs(seqs)
            line_seqs[entry.name] = seqs
            if not args.no_bench:
                run.timing = bench(
                    lambda t, e=entry: e.encode(t, policy),
                    full_text,
                    args.runs,
                    args.loops,
                )
        except SubtokError as exc:
            run.error = str(exc)
        runs.append(run)
    report = build_report(runs, echo)
    for cand in report.candidates:
        for base in report.baselines:
            report.nsl_matrix[(cand, base)] = nsl_per_line(
                line_seqs[cand], line_seqs[base]
            )
    return report


def cmd_bench(args, argv: list[str]) -> int:
    policy = parse_policy(args.policy)
    entries = _collect_entries(args)
    wc = _eval_words(args)
    text = concat_words(wc)
    for entry in entries:
        result = bench(
            lambda t, e=entry: e.encode(t, policy), text, args.runs, args.loops
        )
        print(f"{entry.name}: {result.line}")
    return 0


# --- argument parsing ----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subtok",
        description="Train and evaluate subword tokenizers (BPE, WordPiece, unigram LM).",
    )
    parser.add_argument(
        "--version", action="version", version=f"subtok {__version__}"
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add_policy(p):
        p.add_argument(
            "--policy",
            default=None,
            help="pre-tokenization policy, e.g. mode=tsheg_syllable,normalization=none",
        )

    train = sub.add_parser("train", help="train a tokenizer and save a model directory")
    train.add_argument("--algo", choices=ALGORITHMS, required=True)
    train.add_argument("--corpus", required=True)
    train.add_argument("--vocab-size", type=int, required=True)
    train.add_argument("--out", required=True)
    add_policy(train)
    train.add_argument("--min-frequency", type=int, default=2)
    train.add_argument("--bpe-mode", choices=("char", "byte"), default="char")
    train.add_argument("--byte-fallback", choices=("on", "off"), default="on")
    train.add_argument("--special", action="append", default=[])
    train.add_argument("--unk", default=None)
    train.add_argument("--coverage", type=float, default=1.0)
    train.add_argument("--max-piece-length", type=int, default=16)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--runs", type=int, default=7)
    train.add_argument("--loops", type=int, default=1)
    train.add_argument("--dedupe", action="store_true")

    encode = sub.add_parser("encode", help="encode (or decode) text line by line")
    encode.add_argument("--model")
    encode.add_argument("--baseline")
    encode.add_argument("--input")
    add_policy(encode)
    encode.add_argument("--pieces", action="store_true", help="emit pieces, not ids")
    encode.add_argument("--json", action="store_true", help="emit one JSON object per line")
    encode.add_argument("--decode", action="store_true", help="invert: ids in, text out")
    encode.add_argument(
        "--drop-delims",
        action="store_true",
        help="drop delimiter tokens (evaluation-style encoding)",
    )

    ev = sub.add_parser("eval", help="compare tokenizers on an evaluation dataset")
    ev.add_argument("--model", action="append", default=[])
    ev.add_argument("--baseline", action="append", default=[])
    ev.add_argument("--dataset", required=True)
    add_policy(ev)
    ev.add_argument("--dedupe", action="store_true")
    ev.add_argument("--nsl-mode", choices=("total", "per_line"), default="total")
    ev.add_argument("--format", choices=("json", "csv", "table"), default="json")
    ev.add_argument("--out", help="also write the JSON report here")
    ev.add_argument("--csv", help="also write the NSL matrix CSV here")
    ev.add_argument("--no-bench", action="store_true")
    ev.add_argument("--runs", type=int, default=7)
    ev.add_argument("--loops", type=int, default=None)

    be = sub.add_parser("bench", help="time tokenizers on an evaluation dataset")
    be.add_argument("--model", action="append", default=[])
    be.add_argument("--baseline", action="append", default=[])
    be.add_argument("--dataset", required=True)
    add_policy(be)
    be.add_argument("--dedupe", action="store_true")
    be.add_argument("--runs", type=int, default=7)
    be.add_argument("--loops", type=int, default=None)

    return parser


_COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage problems
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.cmd](args, argv)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return 1
    except SubtokError as exc:
        _log(f"error: {exc}")
        return 2
    except Exception:  # noqa: BLE001 - last-resort boundary
        traceback.print_exc()
        return 3
