"""Thin wrapper around the subtok command-line interface.

Everything delegates to the installed `subtok` executable and the file
formats it documents; no tokenization or metric logic lives here. Errors
cross the boundary as (exit code, stderr text) and surface as CoreError.

The core processes text line by line, so encode/decode here are
line-oriented too: `BoundTokenizer.encode` flattens the per-line token
pairs, `encode_lines` keeps the line structure, and `decode` accepts
either one line's ids or a list of per-line id lists.
"""

from __future__ import annotations

import json
import os
import shlex
import shutil
import subprocess
import sys
import tempfile

__version__ = "0.1.0"

__all__ = [
    "BoundTokenizer",
    "CoreError",
    "core_version",
    "evaluate",
    "load",
    "load_baseline",
    "train",
    "version",
]


class CoreError(Exception):
    """Nonzero exit from the core CLI: .code and .message as the core sent them."""

    def __init__(self, code: int, message: str):
        super().__init__(f"subtok exited {code}: {message}")
        self.code = code
        self.message = message


def _cli_command() -> list[str]:
    spec = os.environ.get("SUBTOK_CLI")
    if spec:
        return shlex.split(spec)
    exe = shutil.which("subtok")
    if exe:
        return [exe]
    return [sys.executable, "-m", "subtok"]


def _run(args: list[str], stdin: bytes | None = None) -> bytes:
    proc = subprocess.run(
        _cli_command() + args,
        input=stdin,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    if proc.returncode != 0:
        message = proc.stderr.decode("utf-8", "replace").strip()
        raise CoreError(proc.returncode, message)
    return proc.stdout


def version() -> str:
    return __version__


def core_version() -> str:
    """Version reported by the core executable (`subtok X.Y.Z`)."""
    out = _run(["--version"]).decode("utf-8").strip()
    return out.split()[-1]


def _policy_args(policy: str | None) -> list[str]:
    return ["--policy", policy] if policy else []


class BoundTokenizer:
    """Handle to one core tokenizer: a trained model directory or a baseline spec.

    Safe to share across threads; every call is an independent core process.
    """

    def __init__(self, kind: str, source: str):
        if kind not in ("model", "baseline"):
            raise ValueError(f"unknown tokenizer kind {kind!r}")
        self.kind = kind
        self.source = source

    def _source_args(self) -> list[str]:
        flag = "--model" if self.kind == "model" else "--baseline"
        return [flag, self.source]

    def encode_lines(
        self, text: str, policy: str | None = None, drop_delims: bool = False
    ) -> list[list[tuple[int, str]]]:
        args = ["encode", *self._source_args(), "--json", *_policy_args(policy)]
        if drop_delims:
            args.append("--drop-delims")
        out = _run(args, stdin=text.encode("utf-8", "surrogateescape"))
        lines = []
        for row in out.decode("utf-8", "surrogateescape").splitlines():
            obj = json.loads(row)
            lines.append(list(zip(obj["ids"], obj["pieces"])))
        return lines

    def encode(
        self, text: str, policy: str | None = None, drop_delims: bool = False
    ) -> list[tuple[int, str]]:
        return [
            pair
            for line in self.encode_lines(text, policy, drop_delims)
            for pair in line
        ]

    def decode(self, ids, policy: str | None = None) -> str:
        if self.kind != "model":
            raise CoreError(1, "decode needs a trained model, not a baseline")
        if ids and isinstance(ids[0], (list, tuple)):
            rows = ids
        else:
            rows = [ids]
        payload = "\n".join(" ".join(str(i) for i in row) for row in rows)
        out = _run(
            ["encode", *self._source_args(), "--decode", *_policy_args(policy)],
            stdin=payload.encode("utf-8"),
        )
        return out.decode("utf-8", "surrogateescape")


def train(
    algorithm: str,
    corpus_path: str,
    vocab_size: int,
    options: dict | None = None,
) -> BoundTokenizer:
    """Train through the core CLI and return a handle to the model directory.

    `options` keys mirror the CLI flags with underscores for hyphens
    (min_frequency, policy, bpe_mode, byte_fallback, special, unk, coverage,
    max_piece_length, seed, runs, loops, dedupe). `out` picks the model
    directory; without it a fresh temporary directory is created.
    """
    opts = dict(options or {})
    out_dir = opts.pop("out", None) or tempfile.mkdtemp(prefix="subtok-model-")
    args = [
        "train",
        "--algo", algorithm,
        "--corpus", str(corpus_path),
        "--vocab-size", str(vocab_size),
        "--out", str(out_dir),
    ]
    for key, value in opts.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                args.append(flag)
        elif isinstance(value, (list, tuple)):
            for item in value:
                args.extend([flag, str(item)])
        else:
            args.extend([flag, str(value)])
    _run(args)
    return BoundTokenizer("model", str(out_dir))


def load(model_dir: str) -> BoundTokenizer:
    """Handle to an existing trained model directory."""
    return BoundTokenizer("model", str(model_dir))


def load_baseline(spec: str) -> BoundTokenizer:
    """Handle to a pretrained baseline, e.g. 'pure_byte' or 'vocab_merges:DIR'."""
    return BoundTokenizer("baseline", spec)


def evaluate(
    models: list[str] | None,
    baselines: list[str] | None,
    dataset_path: str,
    policy: str | None = None,
    nsl_mode: str | None = None,
    dedupe: bool = False,
    bench: bool = False,
    runs: int | None = None,
    loops: int | None = None,
) -> dict:
    """Run the core evaluation and return its JSON report parsed into a dict.

    Benching is off by default so reports are deterministic; pass bench=True
    (and optionally runs/loops) for timing columns.
    """
    args = ["eval"]
    for m in models or []:
        args.extend(["--model", str(m)])
    for b in baselines or []:
        args.extend(["--baseline", str(b)])
    args.extend(["--dataset", str(dataset_path)])
    args.extend(_policy_args(policy))
    if nsl_mode:
        args.extend(["--nsl-mode", nsl_mode])
    if dedupe:
        args.append("--dedupe")
    if not bench:
        args.append("--no-bench")
    if runs is not None:
        args.extend(["--runs", str(runs)])
    if loops is not None:
        args.extend(["--loops", str(loops)])
    return json.loads(_run(args).decode("utf-8"))
