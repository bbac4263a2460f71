"""Evaluation metrics, benchmarking harness, and report assembly.

Quality metrics are exact rational arithmetic until the moment of rendering;
rounding is half-even (2 decimals, NSL at 4). Benchmarks use a monotonic
clock, discard a warm-up pass, check output identity across runs, and report
the population standard deviation over per-run means.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .corpus import PretokenPolicy
from .errors import DataError, SubtokError
from .tokens import TokenSeq

THREADS_ENV = "SUBTOK_THREADS"

EncodeFn = Callable[[str, PretokenPolicy], TokenSeq]


def nsl(candidate: TokenSeq, baseline: TokenSeq) -> Fraction:
    """Corpus-total token-count ratio: |candidate.ids| / |baseline.ids|."""
    if not baseline.ids:
        raise DataError("NSL baseline tokenization is empty")
    return Fraction(len(candidate.ids), len(baseline.ids))


def nsl_per_line(candidates: list[TokenSeq], baselines: list[TokenSeq]) -> Fraction:
    """Mean of per-line token-count ratios (sensitivity-analysis variant)."""
    if len(candidates) != len(baselines):
        raise DataError("per-line NSL needs equal-length sequence lists")
    if not candidates:
        raise DataError("per-line NSL over zero lines")
    total = Fraction(0)
    for cand, base in zip(candidates, baselines):
        total += nsl(cand, base)
    return total / len(candidates)


def fertility(ts: TokenSeq) -> Fraction:
    """Mean tokens per word, counting only tokens inside word spans."""
    if not ts.word_spans:
        raise DataError("fertility over zero words")
    return Fraction(sum(s.token_count for s in ts.word_spans), len(ts.word_spans))


def fertility_raw(ts: TokenSeq) -> Fraction:
    """Total token count over word count; can dip below 1 when tokens
    cross word boundaries (delimiter-bearing encodes)."""
    if not ts.word_spans:
        raise DataError("fertility over zero words")
    return Fraction(len(ts.ids), len(ts.word_spans))


def pcw(ts: TokenSeq) -> tuple[int, Fraction]:
    """Words split into two or more tokens: (count, proportion)."""
    if not ts.word_spans:
        raise DataError("PCW over zero words")
    continued = sum(1 for s in ts.word_spans if s.token_count >= 2)
    return continued, Fraction(continued, len(ts.word_spans))


def format_fixed(value: Fraction | int, ndigits: int) -> str:
    """Render an exact rational to fixed decimals with half-even rounding."""
    frac = Fraction(value)
    negative = frac < 0
    scaled = abs(frac) * 10**ndigits
    units = round(scaled)  # Fraction.__round__ is exact half-even
    digits = str(units).rjust(ndigits + 1, "0")
    body = f"{digits[:-ndigits]}.{digits[-ndigits:]}" if ndigits else digits
    return f"-{body}" if negative and units else body


@dataclass
class BenchResult:
    mean_ms: float
    stddev_ms: float
    runs: int
    loops_per_run: int
    per_run_ms: list[float] = field(default_factory=list)

    @property
    def line(self) -> str:
        return format_timing(
            self.mean_ms / 1000.0, self.stddev_ms / 1000.0, self.runs, self.loops_per_run
        )

    def as_dict(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "stddev_ms": self.stddev_ms,
            "runs": self.runs,
            "loops_per_run": self.loops_per_run,
            "line": self.line,
        }


def _format_time(seconds: float) -> str:
    if seconds >= 60.0:
        minutes = int(seconds // 60)
        return f"{minutes} min {_format_time(seconds - 60.0 * minutes)}"
    for scale, suffix in ((1.0, "s"), (1e-3, "ms"), (1e-6, "us"), (1e-9, "ns")):
        if seconds >= scale:
            return f"{seconds / scale:.3g} {suffix}"
    return f"{seconds / 1e-9:.3g} ns"


def format_timing(mean_s: float, std_s: float, runs: int, loops: int) -> str:
    run_word = "run" if runs == 1 else "runs"
    loop_word = "loop" if loops == 1 else "loops"
    return (
        f"{_format_time(mean_s)} ± {_format_time(std_s)} per loop "
        f"(mean ± std. dev. of {runs} {run_word}, {loops} {loop_word} each)"
    )


# Auto-calibration grows loop counts by 10x until one batch takes this long.
_MIN_BATCH_SECONDS = 0.2


def bench(
    encoder: Callable[[str], object],
    text: str,
    runs: int = 7,
    loops: int | None = None,
) -> BenchResult:
    """Time encoder(text): discarded warm-up batch, then `runs` batches of `loops`.

    Each run's output must equal the first (reference) call's output.
    loops=None calibrates the loop count upward until a batch is long
    enough to time reliably.
    """
    if runs < 1:
        raise DataError("bench needs at least one run")
    if loops is not None and loops < 1:
        raise DataError("bench needs at least one loop per run")
    reference = encoder(text)
    if loops is None:
        loops = 1
        while loops < 10**9:
            start = time.perf_counter()
            for _ in range(loops):
                encoder(text)
            if time.perf_counter() - start >= _MIN_BATCH_SECONDS:
                break
            loops *= 10
    else:
        # calibration ends on a full batch at the final loop count; give
        # explicit loop counts the same discarded warm-up batch so the first
        # timed run is not systematically cold
        for _ in range(loops):
            encoder(text)
    per_loop: list[float] = []
    for _ in range(runs):
        out = None
        start = time.perf_counter()
        for _ in range(loops):
            out = encoder(text)
        elapsed = time.perf_counter() - start
        if out != reference:
            raise DataError("encoder output changed between timing runs")
        per_loop.append(elapsed / loops)
    mean = math.fsum(per_loop) / runs
    variance = math.fsum((x - mean) ** 2 for x in per_loop) / runs
    return BenchResult(
        mean_ms=mean * 1000.0,
        stddev_ms=math.sqrt(variance) * 1000.0,
        runs=runs,
        loops_per_run=loops,
        per_run_ms=[x * 1000.0 for x in per_loop],
    )


@dataclass
class EvalEntry:
    """One tokenizer hooked into the evaluation harness."""

    name: str
    encode: EncodeFn
    vocab_size: int | None = None
    is_baseline: bool = False


@dataclass
class TokenizerRun:
    name: str
    text_id: str
    seq: TokenSeq | None = None
    vocab_size: int | None = None
    is_baseline: bool = False
    error: str | None = None
    timing: BenchResult | None = None


@dataclass
class MetricsReport:
    candidates: list[str]
    baselines: list[str]
    token_counts: dict[str, int]
    nsl_matrix: dict[tuple[str, str], Fraction]
    fertility: dict[str, Fraction]
    fertility_raw: dict[str, Fraction]
    pcw: dict[str, Fraction]
    continued_counts: dict[str, int]
    vocab_sizes: dict[str, int | None]
    timing: dict[str, BenchResult]
    errors: dict[str, str]
    config_echo: dict
    text_id: str

    def to_json_dict(self) -> dict:
        def rational(f: Fraction) -> dict:
            return {
                "value": float(f),
                "exact": f"{f.numerator}/{f.denominator}",
            }

        nsl_out: dict[str, dict] = {}
        for (cand, base), value in self.nsl_matrix.items():
            nsl_out.setdefault(cand, {})[base] = rational(value)
        return {
            "schema": "metrics/v1",
            "candidates": self.candidates,
            "baselines": self.baselines,
            "token_counts": self.token_counts,
            "nsl": nsl_out,
            "fertility": {k: rational(v) for k, v in self.fertility.items()},
            "fertility_raw": {k: rational(v) for k, v in self.fertility_raw.items()},
            "pcw": {
                k: {
                    "continued": self.continued_counts[k],
                    "proportion": rational(v),
                }
                for k, v in self.pcw.items()
            },
            "vocab_sizes": self.vocab_sizes,
            "timing": {k: v.as_dict() for k, v in self.timing.items()},
            "errors": self.errors,
            "config_echo": self.config_echo,
            "text_id": self.text_id,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    def to_csv_matrix(self) -> str:
        """NSL heat-map data: candidate rows, baseline columns, 4-decimal cells."""
        lines = ["candidate," + ",".join(self.baselines)]
        for cand in self.candidates:
            cells = []
            for base in self.baselines:
                value = self.nsl_matrix.get((cand, base))
                cells.append("" if value is None else format_fixed(value, 4))
            lines.append(cand + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        """Human-readable summary, one row per tokenizer."""
        headers = ["name", "vocab", "tokens", "fertility", "fert_raw", "continued", "pcw"]
        for base in self.baselines:
            headers.append(f"nsl:{base}")
        headers.append("time")
        rows = [headers]
        for name in self.candidates:
            row = [
                name,
                str(self.vocab_sizes.get(name) or "-"),
                str(self.token_counts[name]),
                format_fixed(self.fertility[name], 2),
                format_fixed(self.fertility_raw[name], 2),
                str(self.continued_counts[name]),
                format_fixed(self.pcw[name], 2),
            ]
            for base in self.baselines:
                value = self.nsl_matrix.get((name, base))
                row.append("-" if value is None else format_fixed(value, 4))
            timing = self.timing.get(name)
            row.append(timing.line if timing else "-")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
        out = []
        for row in rows:
            out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return "\n".join(out) + "\n"


def text_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_report(runs: list[TokenizerRun], config: dict) -> MetricsReport:
    """Assemble matrices and maps from per-tokenizer runs (deterministic)."""
    text_ids = {r.text_id for r in runs}
    if len(text_ids) > 1:
        raise DataError("tokenizer runs cover different evaluation texts")
    text_id = text_ids.pop() if text_ids else ""
    ok = [r for r in runs if r.seq is not None]
    base_runs = [r for r in ok if r.is_baseline]
    report = MetricsReport(
        candidates=[r.name for r in ok],
        baselines=[r.name for r in base_runs],
        token_counts={},
        nsl_matrix={},
        fertility={},
        fertility_raw={},
        pcw={},
        continued_counts={},
        vocab_sizes={r.name: r.vocab_size for r in ok},
        timing={r.name: r.timing for r in ok if r.timing is not None},
        errors={r.name: r.error for r in runs if r.error is not None},
        config_echo=config,
        text_id=text_id,
    )
    for r in ok:
        seq = r.seq
        assert seq is not None
        report.token_counts[r.name] = len(seq.ids)
        report.fertility[r.name] = fertility(seq)
        report.fertility_raw[r.name] = fertility_raw(seq)
        continued, proportion = pcw(seq)
        report.continued_counts[r.name] = continued
        report.pcw[r.name] = proportion
        for b in base_runs:
            assert b.seq is not None
            report.nsl_matrix[(r.name, b.name)] = nsl(seq, b.seq)
    return report


def thread_limit(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return max(1, min(4, n_tasks))
    try:
        value = int(raw)
    except ValueError as exc:
        raise DataError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise DataError(f"{THREADS_ENV} must be >= 1, got {value}")
    return min(value, max(1, n_tasks))


def evaluate(
    entries: list[EvalEntry],
    text: str,
    policy: PretokenPolicy,
    config: dict | None = None,
    run_bench: bool = False,
    runs: int = 7,
    loops: int | None = None,
) -> MetricsReport:
    """Encode the shared evaluation text with every tokenizer and report.

    Encoding fans out across a thread pool (capped by SUBTOK_THREADS);
    benchmarking afterwards is strictly sequential. A tokenizer that raises
    is recorded under errors and the run continues without it.
    """
    if not entries:
        raise DataError("evaluate needs at least one tokenizer")
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise DataError("duplicate tokenizer names in evaluation")
    text_id = text_fingerprint(text)

    def run_one(entry: EvalEntry) -> TokenizerRun:
        run = TokenizerRun(
            name=entry.name,
            text_id=text_id,
            vocab_size=entry.vocab_size,
            is_baseline=entry.is_baseline,
        )
        try:
            run.seq = entry.encode(text, policy)
        except SubtokError as exc:
            run.error = str(exc)
        return run

    with ThreadPoolExecutor(max_workers=thread_limit(len(entries))) as pool:
        results = list(pool.map(run_one, entries))

    if run_bench:
        for entry, run in zip(entries, results):
            if run.seq is None:
                continue
            run.timing = bench(lambda t: entry.encode(t, policy), text, runs, loops)

    return build_report(results, config or {})
