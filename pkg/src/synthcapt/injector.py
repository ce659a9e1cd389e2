"""Phoneme-level (P2P) generation of mispronounced training examples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .phonemes import (DEL, INS, INVENTORY, MATCH, SUB, Alignment, EditOp, ErrorLabels,
                       PhonemeInventory, PhonemeSeq)

PROVENANCES = ("original", "p2p", "t2s", "s2s")
MAX_RETRIES = 3


@dataclass(frozen=True)
class PerturbationConfig:
    p_sub: float = 0.2
    p_ins: float = 0.05
    p_del: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("p_sub", "p_ins", "p_del"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        if self.p_sub + self.p_del > 1.0:
            raise ValueError("p_sub + p_del must not exceed 1")

    @classmethod
    def substitution_only(cls, p_sub: float, seed: int = 0) -> "PerturbationConfig":
        return cls(p_sub=p_sub, p_ins=0.0, p_del=0.0, seed=seed)

    @property
    def is_zero(self) -> bool:
        return self.p_sub == self.p_ins == self.p_del == 0.0


@dataclass(frozen=True)
class TrainingExample:
    labels: ErrorLabels
    speech: Any  # speech.Utterance
    canonical: PhonemeSeq
    provenance: str
    info: dict = field(default_factory=dict, compare=False)  # e.g. split, speaker group, severity

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if len(self.labels.word_errors) != self.canonical.n_words:
            raise ValueError("labels are not aligned to the canonical word spans")


def sample_utterances(corpus: Sequence, n: int, seed) -> list:
    """Draw ``n`` references i.i.d. with replacement."""
    if len(corpus) == 0:
        raise ValueError("cannot sample from an empty corpus")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(corpus), size=n)
    return [corpus[i] for i in idx]


def _rng(cfg: PerturbationConfig, rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(cfg.seed if rng is None else rng)


def perturb_with_ops(r: PhonemeSeq, cfg: PerturbationConfig, rng=None,
                     inventory: PhonemeInventory = INVENTORY) -> tuple[PhonemeSeq, Alignment]:
    """Sample r' ~ p(r'|r) and return it with the edit script that produced it."""
    inventory.check(r.phonemes)
    rng = _rng(cfg, rng)
    symbols = inventory.symbols
    words, ops = [], []
    j_out = 0
    for _, start, end in r.word_spans:
        word = []
        remaining = end - start
        for i in range(start, end):
            u = rng.random()
            sym = r.phonemes[i]
            if u < cfg.p_sub:
                choices = [s for s in symbols if s != sym]
                new = choices[rng.integers(len(choices))]
                word.append(new)
                ops.append(EditOp(SUB, i, j_out))
                j_out += 1
            elif u < cfg.p_sub + cfg.p_del and (remaining > 1 or word):
                ops.append(EditOp(DEL, i, None))
            else:
                word.append(sym)
                ops.append(EditOp(MATCH, i, j_out))
                j_out += 1
            remaining -= 1
            if rng.random() < cfg.p_ins:
                word.append(symbols[rng.integers(len(symbols))])
                ops.append(EditOp(INS, None, j_out))
                j_out += 1
        words.append(word)
    cost = sum(op.op != MATCH for op in ops)
    return PhonemeSeq.from_words(words), Alignment(tuple(ops), cost)


def perturb(r: PhonemeSeq, cfg: PerturbationConfig, rng=None,
            inventory: PhonemeInventory = INVENTORY) -> PhonemeSeq:
    return perturb_with_ops(r, cfg, rng, inventory)[0]


def make_p2p_example(u, r: PhonemeSeq, cfg: PerturbationConfig, rng=None) -> TrainingExample:
    """{e_err, s, r'}: the speech is kept as-is, only the transcription changes.

    Labels are aligned to r' (the canonical shown to the detector); at word
    level they equal ``project_errors(r, r')`` under the recorded edit script.
    """
    rng = _rng(cfg, rng)
    for _ in range(MAX_RETRIES):
        r_prime, ops = perturb_with_ops(r, cfg, rng)
        if len(r_prime) > 0:
            break
    else:
        raise RuntimeError("perturbation kept producing empty sequences")
    return TrainingExample(labels=labels_on_perturbed(r, r_prime, ops), speech=u, canonical=r_prime,
                           provenance="p2p")


def labels_on_perturbed(r: PhonemeSeq, r_prime: PhonemeSeq, ops: Alignment) -> ErrorLabels:
    """Error labels on the positions of r' for an edit script r -> r' that keeps word boundaries.

    Substituted and inserted phonemes are marked.  A deletion marks the r'
    phoneme just before it in the same word (the word's first phoneme when
    nothing precedes it), so the error stays in the word it happened in.
    """
    errs = [0] * len(r_prime)
    word, last_j, deleted = 0, {}, []
    for op in ops.ops:
        if op.i is not None:
            word = r.word_of(op.i)
        if op.op in (SUB, INS):
            errs[op.j] = 1
        if op.op == DEL:
            deleted.append((word, last_j.get(word)))
        elif op.j is not None:
            last_j[word] = op.j
    for word, j in deleted:
        errs[r_prime.word_spans[word][1] if j is None else j] = 1
    return ErrorLabels.from_phonemes(r_prime, errs)


def _invert(al: Alignment) -> Alignment:
    """Edit script of b -> a from one of a -> b."""
    flip = {MATCH: MATCH, SUB: SUB, DEL: INS, INS: DEL}
    return Alignment(tuple(EditOp(flip[o.op], o.j, o.i) for o in al.ops), al.cost)


invert_alignment = _invert
