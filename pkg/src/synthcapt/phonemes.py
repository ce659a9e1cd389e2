"""Phoneme inventory, sequences, lexicon, alignment and error projection."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

CONSONANTS = ("r", "m", "n", "d", "f", "s")
VOWEL_BASES = ("iy", "ih", "ah", "ax", "ay", "uw")
STRESS_LEVELS = (0, 1, 2)
BLANK = "<b>"


@dataclass(frozen=True)
class PhonemeInventory:
    symbols: tuple[str, ...]
    vowels: tuple[str, ...]
    blank: str = BLANK
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("inventory symbols must be unique")
        if self.blank in self.symbols:
            raise ValueError("blank symbol must not be part of the inventory")
        for v in self.vowels:
            for s in STRESS_LEVELS:
                if f"{v}{s}" not in self.symbols:
                    raise ValueError(f"vowel {v} lacks stress variant {s}")
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, sym) -> bool:
        return sym in self.index

    @property
    def blank_id(self) -> int:
        # blank sits after the last real symbol in every posteriorgram
        return len(self.symbols)

    @property
    def n_classes(self) -> int:
        return len(self.symbols) + 1

    def id(self, sym: str) -> int:
        try:
            return self.index[sym]
        except KeyError:
            raise ValueError(f"unknown phoneme {sym!r}") from None

    def ids(self, syms: Iterable[str]) -> list[int]:
        return [self.id(s) for s in syms]

    def check(self, syms: Iterable[str]) -> None:
        for s in syms:
            if s not in self.index:
                raise ValueError(f"unknown phoneme {s!r}")

    def is_vowel(self, sym: str) -> bool:
        return sym[-1:].isdigit() and sym[:-1] in self.vowels

    def base(self, sym: str) -> str:
        return sym[:-1] if self.is_vowel(sym) else sym

    def stress(self, sym: str) -> int | None:
        return int(sym[-1]) if self.is_vowel(sym) else None

    def with_stress(self, sym: str, level: int) -> str:
        if not self.is_vowel(sym):
            raise ValueError(f"{sym!r} is not a vowel")
        return f"{self.base(sym)}{level}"

    @property
    def bases(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.base(s) for s in self.symbols))


def default_inventory() -> PhonemeInventory:
    vowels = tuple(f"{v}{s}" for v in VOWEL_BASES for s in STRESS_LEVELS)
    return PhonemeInventory(symbols=CONSONANTS + vowels, vowels=VOWEL_BASES)


INVENTORY = default_inventory()


@dataclass(frozen=True)
class PhonemeSeq:
    """Phoneme sequence split into contiguous word spans ``(word, start, end)``."""

    phonemes: tuple[str, ...]
    word_spans: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "phonemes", tuple(self.phonemes))
        object.__setattr__(self, "word_spans", tuple(tuple(s) for s in self.word_spans))
        pos = 0
        for k, (w, start, end) in enumerate(self.word_spans):
            if w != k:
                raise ValueError("word spans must be numbered 0..W-1 in order")
            if start != pos or end <= start:
                raise ValueError(f"word span {k} is empty or not contiguous")
            pos = end
        if pos != len(self.phonemes):
            raise ValueError("word spans must cover the whole sequence")

    @classmethod
    def from_words(cls, words: Sequence[Sequence[str]]) -> "PhonemeSeq":
        phonemes, spans, pos = [], [], 0
        for w, word in enumerate(words):
            word = list(word)
            spans.append((w, pos, pos + len(word)))
            phonemes.extend(word)
            pos += len(word)
        return cls(tuple(phonemes), tuple(spans))

    @classmethod
    def single(cls, phonemes: Sequence[str]) -> "PhonemeSeq":
        return cls.from_words([phonemes])

    @classmethod
    def parse(cls, text: str) -> "PhonemeSeq":
        """Parse ``"ih0 n ah1 f | r iy0 m ay1 n d"`` (``|`` separates words)."""
        return cls.from_words([w.split() for w in text.split("|")])

    def __len__(self) -> int:
        return len(self.phonemes)

    def __iter__(self):
        return iter(self.phonemes)

    def __getitem__(self, j):
        return self.phonemes[j]

    @property
    def n_words(self) -> int:
        return len(self.word_spans)

    def words(self) -> list[tuple[str, ...]]:
        return [self.phonemes[s:e] for _, s, e in self.word_spans]

    def word_of(self, j: int) -> int:
        for w, s, e in self.word_spans:
            if s <= j < e:
                return w
        raise IndexError(j)

    def word_index(self) -> list[int]:
        """Word id for every phoneme position."""
        out = []
        for w, s, e in self.word_spans:
            out.extend([w] * (e - s))
        return out

    def replace(self, j: int, sym: str) -> "PhonemeSeq":
        ph = list(self.phonemes)
        ph[j] = sym
        return PhonemeSeq(tuple(ph), self.word_spans)

    def __str__(self) -> str:
        return " | ".join(" ".join(w) for w in self.words())


@dataclass(frozen=True)
class ErrorLabels:
    phoneme_errors: tuple[int, ...]
    word_errors: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "phoneme_errors", tuple(int(x) for x in self.phoneme_errors))
        object.__setattr__(self, "word_errors", tuple(int(x) for x in self.word_errors))

    @classmethod
    def from_phonemes(cls, seq: PhonemeSeq, phoneme_errors: Sequence[int]) -> "ErrorLabels":
        if len(phoneme_errors) != len(seq):
            raise ValueError("phoneme error vector does not match the sequence")
        words = [int(any(phoneme_errors[s:e])) for _, s, e in seq.word_spans]
        return cls(tuple(phoneme_errors), tuple(words))

    @classmethod
    def no_error(cls, seq: PhonemeSeq) -> "ErrorLabels":
        return cls((0,) * len(seq), (0,) * seq.n_words)

    @property
    def is_error(self) -> bool:
        return any(self.word_errors)


# --- alignment ---------------------------------------------------------------

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


@dataclass(frozen=True)
class EditOp:
    op: str
    i: int | None  # position in a (None for insertions)
    j: int | None  # position in b (None for deletions)


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    cost: int

    def apply(self, a: Sequence[str], b: Sequence[str]) -> list[str]:
        """Rebuild ``b`` from ``a`` following the edit script (symbols of b are looked up)."""
        out = []
        for op in self.ops:
            if op.op == MATCH:
                out.append(a[op.i])
            elif op.op in (SUB, INS):
                out.append(b[op.j])
        return out


def _symbols(x) -> tuple[str, ...]:
    return tuple(x.phonemes) if isinstance(x, PhonemeSeq) else tuple(x)


def align(a, b, inventory: PhonemeInventory | None = INVENTORY) -> Alignment:
    """Minimal-cost edit alignment of ``a`` onto ``b`` (unit costs).

    At equal cost the backtrace prefers match, then substitute, delete, insert.
    """
    a, b = _symbols(a), _symbols(b)
    if not a or not b:
        raise ValueError("cannot align empty sequences")
    if inventory is not None:
        inventory.check(a)
        inventory.check(b)
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(
                d[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
            )
    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            ops.append(EditOp(MATCH if a[i - 1] == b[j - 1] else SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append(EditOp(DEL, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(INS, None, j - 1))
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), d[n][m])


def phoneme_distance(a, b, inventory: PhonemeInventory | None = INVENTORY) -> int:
    return align(a, b, inventory).cost


def project_errors(r: PhonemeSeq, r_prime, alignment: Alignment | None = None) -> ErrorLabels:
    """Label phonemes of ``r`` that are not realized as-is in ``r_prime``.

    With equal lengths and no recorded alignment the comparison is positional
    (substitutions only).  Otherwise the alignment is used: substituted and
    deleted positions are marked directly, an insertion marks the position to
    its left (position 0 when it precedes the sequence).
    """
    for _, s, e in r.word_spans:
        if e <= s:
            raise ValueError("empty word span")
    rp = _symbols(r_prime)
    if alignment is None and len(rp) == len(r):
        errs = [int(x != y) for x, y in zip(r.phonemes, rp)]
        return ErrorLabels.from_phonemes(r, errs)
    if alignment is None:
        alignment = align(r, rp)
    errs = [0] * len(r)
    last = 0
    for op in alignment.ops:
        if op.op in (SUB, DEL):
            errs[op.i] = 1
        elif op.op == INS:
            errs[last] = 1
        if op.i is not None:
            last = op.i
    return ErrorLabels.from_phonemes(r, errs)


# --- syllables ---------------------------------------------------------------

def syllabify(word: Sequence[str], inventory: PhonemeInventory = INVENTORY) -> list[list[int]]:
    """Vowel-anchored syllables as lists of positions within ``word``.

    One syllable per vowel; consonants join the syllable on their left, and
    word-initial consonants join the first syllable.
    """
    nuclei = [k for k, p in enumerate(word) if inventory.is_vowel(p)]
    if not nuclei:
        raise ValueError(f"word without a vowel: {' '.join(word)}")
    sylls = [[] for _ in nuclei]
    cur = 0
    for k in range(len(word)):
        if k in nuclei:
            cur = nuclei.index(k)
        sylls[cur].append(k)
    return sylls


def stress_pattern(word: Sequence[str], inventory: PhonemeInventory = INVENTORY) -> list[int]:
    return [inventory.stress(p) for p in word if inventory.is_vowel(p)]


# --- lexicon -----------------------------------------------------------------

class Lexicon:
    """Word -> list of canonical pronunciations (first entry is the reference)."""

    def __init__(self, entries: dict[str, list[tuple[str, ...]]], inventory: PhonemeInventory = INVENTORY):
        self.inventory = inventory
        self.entries: dict[str, list[tuple[str, ...]]] = {}
        for word, variants in entries.items():
            if not variants:
                raise ValueError(f"word {word!r} has no pronunciation")
            for v in variants:
                if not v:
                    raise ValueError(f"word {word!r} has an empty pronunciation")
                inventory.check(v)
            self.entries[word] = [tuple(v) for v in variants]

    def __len__(self):
        return len(self.entries)

    def __contains__(self, word):
        return word in self.entries

    def __getitem__(self, word) -> list[tuple[str, ...]]:
        return self.entries[word]

    @property
    def words(self) -> list[str]:
        return list(self.entries)

    def canonical(self, word: str) -> tuple[str, ...]:
        return self.entries[word][0]

    def sentence(self, words: Sequence[str], variants: Sequence[int] | None = None) -> PhonemeSeq:
        variants = variants or [0] * len(words)
        return PhonemeSeq.from_words([self.entries[w][k] for w, k in zip(words, variants)])

    def multi_syllable(self) -> list[str]:
        return [w for w in self.words if len(stress_pattern(self.canonical(w), self.inventory)) > 1]

    def with_variants(self) -> list[str]:
        return [w for w in self.words if len(self.entries[w]) > 1]

    @classmethod
    def load(cls, path, inventory: PhonemeInventory = INVENTORY) -> "Lexicon":
        entries: dict[str, list[tuple[str, ...]]] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                word, pron = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>phonemes'") from None
            entries.setdefault(word, []).append(tuple(pron.split()))
        return cls(entries, inventory)

    def save(self, path) -> None:
        lines = [f"{w}\t{' '.join(v)}" for w, vs in self.entries.items() for v in vs]
        Path(path).write_text("\n".join(lines) + "\n")


def save_inventory(inventory: PhonemeInventory, path) -> None:
    lines = [f"{s}\t{'vowel' if inventory.is_vowel(s) else 'consonant'}" for s in inventory.symbols]
    Path(path).write_text("\n".join(lines) + "\n")


def load_inventory(path) -> PhonemeInventory:
    symbols, vowels = [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        sym, kind = line.split("\t")
        symbols.append(sym)
        if kind == "vowel" and sym[:-1] not in vowels:
            vowels.append(sym[:-1])
    return PhonemeInventory(tuple(symbols), tuple(vowels))



ASSET_ENV = "SYNTHCAPT_ASSETS"


def asset_path(name: str):
    """Packaged asset ``name``, or its override in the directory named by ``$SYNTHCAPT_ASSETS``."""
    override = os.environ.get(ASSET_ENV)
    if override:
        path = Path(override) / name
        if path.is_file():
            return path
    return resources.files("synthcapt").joinpath("assets", name)
