"""Deterministic Tibetan-script sample corpus generator.

Used by tests and demos so the toolkit ships with a non-Latin-script corpus
without bundling a data file. Output depends only on (size, seed): the
generator draws nothing but Random.random(), whose Mersenne Twister stream
is stable across Python versions and platforms.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import TSHEG

SHAD = "།"

# 0x0F48 is unassigned; skip it.
_CONSONANTS = [chr(c) for c in range(0x0F40, 0x0F6B) if c != 0x0F48]
_VOWELS = ["", "ི", "ུ", "ེ", "ོ"]
_FINALS = ["", "ག", "ང", "ད", "ན", "བ", "མ", "ར", "ལ", "ས"]


def _syllable_pool() -> list[str]:
    """Fixed enumeration of well-formed syllables; order is part of the
    deterministic contract."""
    pool = []
    for onset in _CONSONANTS:
        for vowel in _VOWELS:
            for final in _FINALS:
                pool.append(onset + vowel + final)
    return pool


def make_text(n_bytes: int = 1_000_000, seed: int = 0) -> str:
    """Roughly n_bytes of UTF-8 text: tsheg-joined syllables, shad-ended
    lines, head-heavy (Zipf-like) syllable reuse."""
    if n_bytes < 1:
        raise ValueError("n_bytes must be positive")
    rng = random.Random(seed)
    pool = _syllable_pool()
    n_pool = len(pool)
    lines: list[str] = []
    total = 0
    while total < n_bytes:
        n_syllables = 6 + int(rng.random() * 9)
        picks = []
        for _ in range(n_syllables):
            r = rng.random()
            picks.append(pool[int(n_pool * r * r * r)])
        line = TSHEG.join(picks) + SHAD
        lines.append(line)
        total += len(line.encode("utf-8")) + 1
    return "\n".join(lines) + "\n"


def make_dataset_text(n_words: int = 2_000, seed: int = 1) -> str:
    """A marker-annotated word list in the evaluation-dataset layout:
    'beg <words...> end' lines with occasional mid/#/*/NUM markers."""
    if n_words < 1:
        raise ValueError("n_words must be positive")
    rng = random.Random(seed)
    pool = _syllable_pool()
    n_pool = len(pool)
    lines: list[str] = []
    emitted = 0
    markers = ["mid", "#", "*", "NUM"]
    while emitted < n_words:
        row = ["beg"]
        for _ in range(min(8, n_words - emitted)):
            r = rng.random()
            row.append(pool[int(n_pool * r * r * r)])
            emitted += 1
            if rng.random() < 0.05:
                row.append(markers[int(rng.random() * len(markers))])
        row.append("end")
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def write_sample(path: str | Path, n_bytes: int = 1_000_000, seed: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(make_text(n_bytes, seed), encoding="utf-8")
    return path
