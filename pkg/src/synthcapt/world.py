"""The toy speaker world: native (L1) and non-native (L2) corpora with word-level labels.

* L1 speakers read 3-word sentences; words with several lexicon
  pronunciations are realised with the alternative variant at
  ``l1_variant_rate`` (correct speech, label 0).
* L2 speakers have larger timbre offsets, noisier recordings and an accent:
  for a speaker-specific subset of phonemes, correct realisations are blended
  a little towards a confusable phoneme.  Errors blend strongly (mostly
  towards the speaker's systematic confusion, otherwise a random phoneme);
  rare insertions and deletions also count as errors.
* Split tags follow the corpus manifest: ``train_L1``, ``train_L2`` and the
  speaker-disjoint ``test_L2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .injector import PerturbationConfig, TrainingExample, make_p2p_example, sample_utterances
from .phonemes import (asset_path, INVENTORY, ErrorLabels, Lexicon, PhonemeSeq, phoneme_distance)
from .speech import SpeakerProfile, SynthConfig, make_quadruple, s2s_convert, synthesize

# L2 confusion partner of every base phoneme
CONFUSABLE = {"iy": "ih", "ih": "iy", "ah": "ax", "ax": "ah", "uw": "ah", "ay": "ah",
              "r": "d", "d": "r", "m": "n", "n": "m", "f": "s", "s": "f"}

SPLITS = ("train_L1", "train_L2", "test_L2")


@lru_cache(maxsize=None)
def default_lexicon() -> Lexicon:
    return Lexicon.load(asset_path("lexicon.tsv"))


@dataclass(frozen=True)
class WorldConfig:
    n_l1_speakers: int = 40
    n_l2_train_speakers: int = 4
    n_l2_test_speakers: int = 8
    n_l1: int = 400
    n_l2_train: int = 80
    n_l2_test: int = 300
    words_per_utt: int = 3
    l1_variant_rate: float = 0.4
    l2_variant_rate: float = 0.2
    l2_error_rate: float = 0.08      # per phoneme
    l2_systematic: float = 0.7       # share of errors towards the speaker's confusion
    l2_indel_rate: float = 0.01      # per phoneme, each of insertion and deletion
    accent_alpha: tuple[float, float] = (0.05, 0.35)
    error_alpha: tuple[float, float] = (0.6, 1.0)
    l1_sigma: float = 0.1
    l2_sigma: float = 0.15
    l1_timbre: float = 0.3
    l2_timbre: float = 0.6
    seed: int = 0


@dataclass(frozen=True)
class Speaker:
    profile: SpeakerProfile
    group: str                       # "L1" or "L2"
    split: str
    accent_bases: tuple[str, ...] = ()  # bases this speaker confuses systematically


@dataclass
class World:
    config: WorldConfig
    lexicon: Lexicon
    speakers: list[Speaker]
    corpora: dict[str, list[TrainingExample]] = field(default_factory=dict)

    def speakers_in(self, split: str) -> list[Speaker]:
        return [s for s in self.speakers if s.split == split]

    @property
    def l1(self) -> list[TrainingExample]:
        return self.corpora["train_L1"]

    @property
    def l2_train(self) -> list[TrainingExample]:
        return self.corpora["train_L2"]

    @property
    def l2_test(self) -> list[TrainingExample]:
        return self.corpora["test_L2"]


def random_profile(speaker_id: int, timbre_scale: float, rng) -> SpeakerProfile:
    timbre = rng.normal(scale=timbre_scale, size=4)
    norm = np.linalg.norm(timbre)
    if norm > 2.9:
        timbre *= 2.9 / norm
    return SpeakerProfile(speaker_id, tuple(timbre), float(rng.uniform(0.8, 1.25)), float(rng.uniform(0.85, 1.15)))


def make_speakers(cfg: WorldConfig, rng) -> list[Speaker]:
    speakers, sid = [], 1
    for _ in range(cfg.n_l1_speakers):
        speakers.append(Speaker(random_profile(sid, cfg.l1_timbre, rng), "L1", "train_L1"))
        sid += 1
    bases = sorted(CONFUSABLE)
    for split, n in (("train_L2", cfg.n_l2_train_speakers), ("test_L2", cfg.n_l2_test_speakers)):
        for _ in range(n):
            accent = tuple(sorted(rng.choice(bases, size=len(bases) // 2, replace=False)))
            speakers.append(Speaker(random_profile(sid, cfg.l2_timbre, rng), "L2", split, accent))
            sid += 1
    return speakers


def _random_words(lexicon: Lexicon, n: int, rng) -> list[str]:
    return [lexicon.words[k] for k in rng.integers(len(lexicon), size=n)]


def _variants(lexicon: Lexicon, words: Sequence[str], rate: float, rng) -> list[int]:
    return [int(rng.integers(1, len(lexicon[w]))) if len(lexicon[w]) > 1 and rng.random() < rate else 0
            for w in words]


def l1_example(lexicon: Lexicon, speaker: Speaker, cfg: WorldConfig, rng,
               words: Sequence[str] | None = None) -> TrainingExample:
    """Native reading: correct by definition, lexicon variants allowed."""
    words = list(words) if words is not None else _random_words(lexicon, cfg.words_per_utt, rng)
    r = lexicon.sentence(words)
    spoken = lexicon.sentence(words, _variants(lexicon, words, cfg.l1_variant_rate, rng))
    u = synthesize(spoken, speaker.profile, int(rng.integers(2**31)), config=SynthConfig(noise_sigma=cfg.l1_sigma))
    return TrainingExample(ErrorLabels.no_error(r), u, r, "original",
                           {"split": speaker.split, "speaker": speaker.profile.speaker_id, "group": "L1",
                            "words": words, "variant_words": [int(a != b) for a, b in zip(r.words(), spoken.words())]})


def _symbol_with_base(base: str, like: str) -> str:
    """A phoneme with the given base, keeping the stress digit of ``like`` for vowels."""
    if INVENTORY.is_vowel(like) and base in INVENTORY.vowels:
        return f"{base}{INVENTORY.stress(like)}"
    if base in INVENTORY.vowels:
        return f"{base}0"
    return base


def l2_example(lexicon: Lexicon, speaker: Speaker, cfg: WorldConfig, rng, words: Sequence[str] | None = None,
               error_rate: float | None = None, variant_rate: float | None = None) -> TrainingExample:
    """Non-native reading of a sentence with accent blends and labelled errors."""
    words = list(words) if words is not None else _random_words(lexicon, cfg.words_per_utt, rng)
    error_rate = cfg.l2_error_rate if error_rate is None else error_rate
    variant_rate = cfg.l2_variant_rate if variant_rate is None else variant_rate
    r = lexicon.sentence(words)
    intended = lexicon.sentence(words, _variants(lexicon, words, variant_rate, rng))
    symbols = INVENTORY.symbols
    spoken_words, accent, word_err, word_dist = [], [], [], []
    for w_int in intended.words():
        out, acc, n_err = [], [], 0
        for k, sym in enumerate(w_int):
            base = INVENTORY.base(sym)
            if rng.random() < cfg.l2_indel_rate and len(out) + len(w_int) - k > 1:
                n_err += 1          # deletion
                continue
            if rng.random() < error_rate:
                if rng.random() < cfg.l2_systematic:
                    target = _symbol_with_base(CONFUSABLE[base], sym)
                else:
                    target = str(rng.choice([s for s in symbols if INVENTORY.base(s) != base]))
                out.append(sym)
                acc.append((target, float(rng.uniform(*cfg.error_alpha))))
                n_err += 1
            else:
                out.append(sym)
                if base in speaker.accent_bases:
                    acc.append((_symbol_with_base(CONFUSABLE[base], sym), float(rng.uniform(*cfg.accent_alpha))))
                else:
                    acc.append((None, 0.0))
            if rng.random() < cfg.l2_indel_rate:
                out.append(str(rng.choice(symbols)))
                acc.append((None, 0.0))
                n_err += 1      # insertion
        spoken_words.append(out)
        accent.extend(acc)
        word_err.append(int(n_err > 0))
        word_dist.append(n_err)
    spoken = PhonemeSeq.from_words(spoken_words)
    u = synthesize(spoken, speaker.profile, int(rng.integers(2**31)), config=SynthConfig(noise_sigma=cfg.l2_sigma),
                   accent=accent)
    labels = ErrorLabels(tuple(_phoneme_flags(r, word_err)), tuple(word_err))
    return TrainingExample(labels, u, r, "original",
                           {"split": speaker.split, "speaker": speaker.profile.speaker_id, "group": "L2",
                            "words": words, "distances": word_dist,
                            "variant_words": [int(a != b) for a, b in zip(r.words(), intended.words())]})


def _phoneme_flags(r: PhonemeSeq, word_err: Sequence[int]) -> list[int]:
    # only word-level annotation exists for L2 speech; flag every phoneme of an erroneous word
    return [word_err[w] for w in r.word_index()]


def make_world(cfg: WorldConfig = WorldConfig(), lexicon: Lexicon | None = None) -> World:
    lexicon = lexicon or default_lexicon()
    rng = np.random.default_rng(cfg.seed)
    speakers = make_speakers(cfg, rng)
    world = World(cfg, lexicon, speakers)
    for split, n in (("train_L1", cfg.n_l1), ("train_L2", cfg.n_l2_train), ("test_L2", cfg.n_l2_test)):
        pool = world.speakers_in(split)
        corpus = []
        split_rng = np.random.default_rng([cfg.seed, SPLITS.index(split)])
        for _ in range(n):
            spk = pool[int(split_rng.integers(len(pool)))]
            maker = l1_example if spk.group == "L1" else l2_example
            corpus.append(maker(lexicon, spk, cfg, split_rng))
        world.corpora[split] = corpus
    return world


def severity_test_set(world: World, n: int, seed: int, max_k: int = 4) -> list[TrainingExample]:
    """Held-out L2 utterances S2S-converted with exactly ``k`` substitutions in one word.

    ``k`` cycles through 1..max_k; the source utterance is an error-free
    accented reading, so the other words stay correct.  ``info['distances']``
    holds the phoneme distance of every word.
    """
    rng = np.random.default_rng([seed, 7])
    pool = world.speakers_in("test_L2")
    lex, cfg = world.lexicon, world.config
    long_words = [w for w in lex.words if len(lex.canonical(w)) >= max_k]
    clean_cfg = replace(cfg, l2_indel_rate=0.0)  # source keeps the canonical length
    out = []
    for i in range(n):
        k = 1 + i % max_k
        spk = pool[int(rng.integers(len(pool)))]
        words = _random_words(lex, cfg.words_per_utt, rng)
        target = int(rng.integers(len(words)))
        words[target] = long_words[int(rng.integers(len(long_words)))]
        src = l2_example(lex, spk, clean_cfg, rng, words=words, error_rate=0.0, variant_rate=0.0)
        r = src.canonical
        _, s, e = r.word_spans[target]
        positions = rng.choice(np.arange(s, e), size=k, replace=False)
        phon = list(r.phonemes)
        for j in positions:
            phon[j] = str(rng.choice([x for x in INVENTORY.symbols if x != phon[j]]))
        r_prime = PhonemeSeq(tuple(phon), r.word_spans)
        s_prime = s2s_convert(src.speech, r, r_prime, seed=int(rng.integers(2**31)))
        dist = [phoneme_distance(a, b) for a, b in zip(r.words(), r_prime.words())]
        labels = ErrorLabels.from_phonemes(r, [int(a != b) for a, b in zip(r.phonemes, r_prime.phonemes)])
        out.append(TrainingExample(labels, s_prime, r, "s2s",
                                   {"split": "test_L2", "speaker": spk.profile.speaker_id, "group": "L2",
                                    "words": words, "distances": dist}))
    return out


def variant_test_set(world: World, n: int, seed: int, variant_rate: float = 0.6) -> list[TrainingExample]:
    """Held-out L2 sentences built around words with lexicon variants."""
    rng = np.random.default_rng([seed, 11])
    lex, cfg = world.lexicon, world.config
    pool = world.speakers_in("test_L2")
    with_var = lex.with_variants()
    out = []
    for _ in range(n):
        words = _random_words(lex, cfg.words_per_utt, rng)
        words[int(rng.integers(len(words)))] = with_var[int(rng.integers(len(with_var)))]
        spk = pool[int(rng.integers(len(pool)))]
        out.append(l2_example(lex, spk, cfg, rng, words=words, variant_rate=variant_rate))
    return out


METHODS = ("none", "p2p", "t2s", "s2s")


def synthetic_corpus(source: Sequence[TrainingExample], method: str, n: int, seed: int,
                     cfg: PerturbationConfig = PerturbationConfig()) -> list[TrainingExample]:
    """Synthetic training examples generated from ``n`` sampled native utterances.

    The spoken sequence of each source utterance is perturbed.  P2P yields
    one example per source (original speech, perturbed canonical).  T2S and
    S2S yield the three generated members of the quadruple; the untouched
    original is already part of the human corpus.
    """
    if method not in METHODS:
        raise ValueError(f"unknown generation method {method!r}")
    if method == "none" or n == 0:
        return []
    rng = np.random.default_rng([seed, 99])
    out = []
    for ex in sample_utterances(source, n, rng):
        r = ex.speech.canonical
        if method == "p2p":
            out.append(make_p2p_example(ex.speech, r, cfg, rng))
        else:
            out.extend(make_quadruple(ex.speech, r, cfg, mode=method, rng=rng)[1:])
    return out


__all__ = ["WorldConfig", "METHODS", "synthetic_corpus", "World", "Speaker", "make_world", "make_speakers", "random_profile", "l1_example", "l2_example", "severity_test_set",
           "variant_test_set", "default_lexicon", "CONFUSABLE", "SPLITS"]
