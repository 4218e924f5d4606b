"""Syllabified lexicon I/O, cleaning, vocabulary and dataset splits.

A lexicon file is UTF-8 text with one ``word<TAB>pronunciation`` entry per
line. The pronunciation carries syllable delimiters (``-`` by default).  In
``char`` mode every other character is one phone (DISC style); in
``whitespace`` mode phones are space-separated tokens and the delimiter is a
token of its own, e.g. ``w V - r I - s F``.

Boundary label ``1`` at position ``i`` means a syllable boundary follows
phone ``i``.
"""

from __future__ import annotations

import enum
import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

PAD = "<pad>"
UNK = "<unk>"


class LexiconError(ValueError):
    """Malformed lexicon line; ``line_number`` is 1-based when known."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class Tokenization(str, enum.Enum):
    CHAR = "char"
    WHITESPACE = "whitespace"


@dataclass(frozen=True)
class LexiconFormat:
    phone_tokenization: Tokenization = Tokenization.CHAR
    syllable_delimiter: str = "-"

    def __post_init__(self):
        object.__setattr__(self, "phone_tokenization", Tokenization(self.phone_tokenization))
        if len(self.syllable_delimiter) != 1 or self.syllable_delimiter.isspace():
            raise ValueError("syllable delimiter must be one non-space character")

    def split_phones(self, text: str) -> list[str]:
        """Tokenize an unsyllabified phone string."""
        if self.phone_tokenization is Tokenization.CHAR:
            return list(text.strip())
        return text.split()

    def join_phones(self, phones: Sequence[str]) -> str:
        if self.phone_tokenization is Tokenization.CHAR:
            return "".join(phones)
        return " ".join(phones)

    def to_dict(self) -> dict:
        return {
            "phone_tokenization": self.phone_tokenization.value,
            "syllable_delimiter": self.syllable_delimiter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LexiconFormat":
        return cls(Tokenization(d["phone_tokenization"]), d["syllable_delimiter"])


@dataclass(frozen=True)
class SyllabifiedEntry:
    word: str
    phones: tuple[str, ...]
    boundaries: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "phones", tuple(self.phones))
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))
        if not self.phones:
            raise ValueError(f"entry {self.word!r} has no phones")
        if len(self.phones) != len(self.boundaries):
            raise ValueError(f"entry {self.word!r}: phones and boundaries differ in length")
        if self.boundaries[-1] != 0:
            raise ValueError(f"entry {self.word!r}: boundary after the final phone")
        if any(b not in (0, 1) for b in self.boundaries):
            raise ValueError(f"entry {self.word!r}: labels must be 0 or 1")

    @property
    def n_syllables(self) -> int:
        return sum(self.boundaries) + 1


def parse_pronunciation(text: str, fmt: LexiconFormat) -> tuple[list[str], list[int]]:
    """Split a syllabified pronunciation into phones and boundary labels."""
    delim = fmt.syllable_delimiter
    if fmt.phone_tokenization is Tokenization.CHAR:
        tokens = list(text)
    else:
        tokens = text.split(" ")
        for tok in tokens:
            if tok == "":
                raise ValueError("empty phone token (repeated or stray space)")
            if tok != delim and delim in tok:
                raise ValueError(f"delimiter must be a separate token, got {tok!r}")
    if not tokens:
        raise ValueError("empty pronunciation")
    if tokens[0] == delim or tokens[-1] == delim:
        raise ValueError("delimiter at start or end of pronunciation")

    phones: list[str] = []
    labels: list[int] = []
    for tok in tokens:
        if tok == delim:
            if labels[-1] == 1:
                raise ValueError("empty syllable between consecutive delimiters")
            labels[-1] = 1
        else:
            if fmt.phone_tokenization is Tokenization.CHAR and tok.isspace():
                raise ValueError("whitespace is not a phone in char mode")
            phones.append(tok)
            labels.append(0)
    return phones, labels


def parse_lexicon(stream: TextIO | Iterable[str], fmt: LexiconFormat = LexiconFormat()) -> list[SyllabifiedEntry]:
    entries = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise LexiconError("missing TAB between word and pronunciation", lineno)
        word, pron = line.split("\t", 1)
        if not pron:
            raise LexiconError("empty pronunciation", lineno)
        try:
            phones, labels = parse_pronunciation(pron, fmt)
        except ValueError as exc:
            raise LexiconError(str(exc), lineno) from None
        entries.append(SyllabifiedEntry(word, tuple(phones), tuple(labels)))
    return entries


def read_lexicon(path: str | Path, fmt: LexiconFormat = LexiconFormat()) -> list[SyllabifiedEntry]:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh, fmt)


def decode_boundaries(
    phones: Sequence[str], labels: Sequence[int], fmt: LexiconFormat = LexiconFormat()
) -> str:
    """Render phones with a delimiter after every phone labelled 1.

    A 1 on the final phone cannot be rendered and is dropped; use
    :func:`has_trailing_boundary` to detect it.
    """
    if len(phones) != len(labels):
        raise ValueError("phones and labels differ in length")
    out: list[str] = []
    last = len(phones) - 1
    for i, (p, y) in enumerate(zip(phones, labels)):
        out.append(p)
        if y and i != last:
            out.append(fmt.syllable_delimiter)
    return fmt.join_phones(out)


def has_trailing_boundary(labels: Sequence[int]) -> bool:
    return len(labels) > 0 and int(labels[-1]) == 1


def format_entry(entry: SyllabifiedEntry, fmt: LexiconFormat = LexiconFormat()) -> str:
    return f"{entry.word}\t{decode_boundaries(entry.phones, entry.boundaries, fmt)}"


def write_lexicon(entries: Iterable[SyllabifiedEntry], path: str | Path, fmt: LexiconFormat = LexiconFormat()):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            fh.write(format_entry(e, fmt) + "\n")


def clean_duplicates(entries: Sequence[SyllabifiedEntry]) -> list[SyllabifiedEntry]:
    """Drop every entry whose word occurs more than once (all copies).

    Words are compared by exact, case-sensitive string equality.  Distinct
    words sharing a pronunciation are kept.
    """
    counts = Counter(e.word for e in entries)
    return [e for e in entries if counts[e.word] == 1]


@dataclass
class PhoneVocabulary:
    phone_to_index: dict[str, int]
    index_to_phone: list[str] = field(init=False)
    pad_index: int = 0
    unk_index: int = 1

    def __post_init__(self):
        self.index_to_phone = [None] * len(self.phone_to_index)
        for p, i in self.phone_to_index.items():
            self.index_to_phone[i] = p
        if self.phone_to_index.get(PAD) != 0 or self.phone_to_index.get(UNK) != 1:
            raise ValueError("PAD and UNK must occupy indices 0 and 1")
        if any(p is None for p in self.index_to_phone):
            raise ValueError("vocabulary indices are not dense")

    def __len__(self) -> int:
        return len(self.index_to_phone)

    def __contains__(self, phone: str) -> bool:
        return phone in self.phone_to_index and phone not in (PAD, UNK)

    def lookup(self, phone: str) -> int:
        return self.phone_to_index.get(phone, self.unk_index)

    def to_list(self) -> list[str]:
        return list(self.index_to_phone)

    @classmethod
    def from_list(cls, phones: Sequence[str]) -> "PhoneVocabulary":
        return cls({p: i for i, p in enumerate(phones)})


def build_vocabulary(entries: Iterable[SyllabifiedEntry]) -> PhoneVocabulary:
    """PAD, UNK, then every phone in order of first occurrence."""
    mapping = {PAD: 0, UNK: 1}
    for e in entries:
        for p in e.phones:
            if p not in mapping:
                mapping[p] = len(mapping)
    if len(mapping) == 2:
        raise ValueError("cannot build a vocabulary from no phones")
    return PhoneVocabulary(mapping)


def encode_phones(phones: Sequence[str], vocab: PhoneVocabulary, max_len: int) -> tuple[np.ndarray, int]:
    if len(phones) > max_len:
        raise ValueError(f"sequence of length {len(phones)} exceeds max_len={max_len}")
    idx = np.full(max_len, vocab.pad_index, dtype=np.int64)
    idx[: len(phones)] = [vocab.lookup(p) for p in phones]
    return idx, len(phones)


def encode_entry(
    entry: SyllabifiedEntry, vocab: PhoneVocabulary, max_len: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Right-pad an entry to ``max_len``; returns (indices, labels, true_len)."""
    idx, n = encode_phones(entry.phones, vocab, max_len)
    labels = np.zeros(max_len, dtype=np.int64)
    labels[:n] = entry.boundaries
    return idx, labels, n


def max_length(entries: Iterable[SyllabifiedEntry]) -> int:
    return max(len(e.phones) for e in entries)


@dataclass
class DatasetSplit:
    train: list[SyllabifiedEntry]
    dev: list[SyllabifiedEntry]
    test: list[SyllabifiedEntry]
    seed: int

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.dev), len(self.test)

    def all_entries(self) -> list[SyllabifiedEntry]:
        return self.train + self.dev + self.test


def split_sizes(n: int) -> tuple[int, int, int]:
    # dev and test each get floor(N/10); train takes the remainder
    # (89,402 -> 71,522 / 8,940 / 8,940)
    n_held = n // 10
    return n - 2 * n_held, n_held, n_held


def split_dataset(entries: Sequence[SyllabifiedEntry], seed: int) -> DatasetSplit:
    """Seeded shuffle, then an 80/10/10 train/dev/test cut (see :func:`split_sizes`)."""
    n = len(entries)
    if n < 10:
        raise ValueError(f"need at least 10 entries to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [entries[i] for i in order]
    n_train, n_dev, _ = split_sizes(n)
    return DatasetSplit(
        shuffled[:n_train], shuffled[n_train : n_train + n_dev], shuffled[n_train + n_dev :], seed
    )


SPLIT_FILES = ("train.tsv", "dev.tsv", "test.tsv")


def write_split(
    split: DatasetSplit,
    out_dir: str | Path,
    fmt: LexiconFormat = LexiconFormat(),
    n_input: int | None = None,
    n_removed: int = 0,
):
    """Persist a split as three lexicon files plus ``split.meta``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(SPLIT_FILES, (split.train, split.dev, split.test)):
        write_lexicon(part, out / name, fmt)
    n_clean = sum(split.sizes)
    meta = {
        "seed": split.seed,
        "input_entries": n_input if n_input is not None else n_clean + n_removed,
        "removed_duplicates": n_removed,
        "cleaned_entries": n_clean,
        "train": split.sizes[0],
        "dev": split.sizes[1],
        "test": split.sizes[2],
        "max_len": max_length(split.all_entries()),
        "phone_tokenization": fmt.phone_tokenization.value,
        "syllable_delimiter": fmt.syllable_delimiter,
    }
    with open(out / "split.meta", "w", encoding="utf-8", newline="\n") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v}\n")


def read_split_meta(path: str | Path) -> dict[str, str]:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                k, v = line.split("=", 1)
                meta[k] = v
    return meta


def read_split(split_dir: str | Path) -> tuple[DatasetSplit, LexiconFormat]:
    d = Path(split_dir)
    meta = read_split_meta(d / "split.meta")
    fmt = LexiconFormat(Tokenization(meta["phone_tokenization"]), meta["syllable_delimiter"])
    parts = [read_lexicon(d / name, fmt) for name in SPLIT_FILES]
    return DatasetSplit(*parts, seed=int(meta["seed"])), fmt


def parse_lines(text: str, fmt: LexiconFormat = LexiconFormat()) -> list[SyllabifiedEntry]:
    """Convenience wrapper for parsing an in-memory lexicon."""
    return parse_lexicon(io.StringIO(text), fmt)
