"""A toy language with a V/CV/VC/CVC syllable inventory.

Words are built from random syllables, concatenated, and then
re-syllabified by maximal onset (a single consonant is the only legal
onset), so gold boundaries are a deterministic function of the phone string.
"""

from __future__ import annotations

from typing import Sequence

from .engine import make_rng
from .lexicon import SyllabifiedEntry

CONSONANTS = tuple("ptkbdgmnlrsfvzh")
VOWELS = tuple("aeiou")
TEMPLATES = ("V", "CV", "VC", "CVC")


def is_vowel(phone: str) -> bool:
    return phone in VOWELS


def maximal_onset_boundaries(phones: Sequence[str]) -> list[int]:
    """Boundary labels placing one consonant (if any) in each following onset."""
    nuclei = [i for i, p in enumerate(phones) if is_vowel(p)]
    if not nuclei:
        raise ValueError("word has no vowel nucleus")
    labels = [0] * len(phones)
    for a, b in zip(nuclei, nuclei[1:]):
        labels[max(a, b - 2)] = 1
    return labels


def syllables_of(phones: Sequence[str], labels: Sequence[int]) -> list[str]:
    out, cur = [], []
    for p, y in zip(phones, labels):
        cur.append(p)
        if y:
            out.append("".join(cur))
            cur = []
    out.append("".join(cur))
    return out


def template_of(syllable: str) -> str:
    return "".join("V" if is_vowel(ch) else "C" for ch in syllable)


def generate_synthetic_language(n_words: int, seed: int) -> list[SyllabifiedEntry]:
    if n_words < 1:
        raise ValueError("n_words must be >= 1")
    rng = make_rng(seed)
    seen: set[str] = set()
    entries = []
    while len(entries) < n_words:
        n_syl = int(rng.integers(1, 6))
        phones: list[str] = []
        for _ in range(n_syl):
            for slot in TEMPLATES[int(rng.integers(len(TEMPLATES)))]:
                pool = VOWELS if slot == "V" else CONSONANTS
                phones.append(pool[int(rng.integers(len(pool)))])
        word = "".join(phones)
        if word in seen:
            continue
        seen.add(word)
        entries.append(SyllabifiedEntry(word, tuple(phones), tuple(maximal_onset_boundaries(phones))))
    return entries
