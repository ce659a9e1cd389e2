"""Lexical-stress error detection on isolated words.

* Feature extraction: frame-level f0 and energy tracks plus per-phoneme
  durations from the forced alignment, grouped into vowel-anchored syllables.
* T2S augmentation: every sampled lexicon word is synthesised by the TTS
  voice once with its canonical stress and once with the primary stress
  moved to another syllable.
* Classifiers estimate the realised stress class of every syllable.  The
  attention model lets each syllable attend over its frame-level
  features; the non-attention baseline only sees nucleus means.
* Detection flags a syllable when the estimated class differs from the
  canonical one and the probability of a mismatch exceeds the threshold.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .nn_utils import (TrainingError, batches, check_finite, finite_difference_check, inventory_hash, load_checkpoint,
                       n_params, save_checkpoint, seeded)
from .phonemes import INVENTORY, Lexicon, PhonemeInventory, PhonemeSeq, syllabify
from .speech import (ENERGY, F0, STRESS_DURATION, TTS_CONFIG, TTS_SPEAKER, Prosody, SpeakerProfile, SynthConfig,
                     Utterance, forced_align, sample_prosody, synthesize)

PRIMARY = 1


def stress_class(level: int, ternary: bool = False) -> int:
    """Binary mode: 1 for primary stress, 0 otherwise.  Ternary mode keeps the level."""
    return int(level) if ternary else int(level == PRIMARY)


def n_stress_classes(ternary: bool) -> int:
    return 3 if ternary else 2


def word_levels(r: Sequence[str], inventory: PhonemeInventory = INVENTORY) -> list[int]:
    return [inventory.stress(p) for p in r if inventory.is_vowel(p)]


def restress(r: PhonemeSeq, levels: Sequence[int], inventory: PhonemeInventory = INVENTORY) -> PhonemeSeq:
    """``r`` with its vowels re-marked to ``levels`` (one per syllable)."""
    nuclei = [j for j, p in enumerate(r.phonemes) if inventory.is_vowel(p)]
    if len(levels) != len(nuclei):
        raise ValueError("one stress level per syllable is required")
    phon = list(r.phonemes)
    for j, lv in zip(nuclei, levels):
        phon[j] = inventory.with_stress(phon[j], int(lv))
    return PhonemeSeq(tuple(phon), r.word_spans)


# --- features --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyllableFeatures:
    """Prosodic features of one isolated word.

    ``f0`` and ``energy`` are the raw frame tracks, ``spans`` the per-phoneme
    frame spans (relative to the first frame), ``syllables`` the phoneme
    positions of every syllable and ``canonical`` the canonical stress class
    per syllable.
    """

    phonemes: tuple[str, ...]
    syllables: tuple[tuple[int, ...], ...]
    spans: tuple[tuple[int, int], ...]
    f0: np.ndarray
    energy: np.ndarray
    canonical: tuple[int, ...]
    ternary: bool = False
    inventory: PhonemeInventory = field(default=INVENTORY, repr=False)

    def __post_init__(self):
        if not self.syllables:
            raise ValueError("a word needs at least one syllable")
        for syl in self.syllables:
            if sum(self.inventory.is_vowel(self.phonemes[j]) for j in syl) != 1:
                raise ValueError("every syllable needs exactly one vowel nucleus")
        if len(self.canonical) != len(self.syllables):
            raise ValueError("one canonical class per syllable is required")
        if sum(c == PRIMARY for c in self.canonical) != 1:
            raise ValueError("the canonical pattern needs exactly one primary stress")
        if len(self.spans) != len(self.phonemes) or self.f0.shape != self.energy.shape:
            raise ValueError("inconsistent feature shapes")

    @property
    def n_syllables(self) -> int:
        return len(self.syllables)

    @property
    def n_frames(self) -> int:
        return len(self.f0)

    @property
    def durations(self) -> tuple[int, ...]:
        return tuple(e - s for s, e in self.spans)

    @property
    def nuclei(self) -> tuple[int, ...]:
        return tuple(next(j for j in syl if self.inventory.is_vowel(self.phonemes[j])) for syl in self.syllables)

    def syllable_spans(self) -> list[tuple[int, int]]:
        return [(self.spans[syl[0]][0], self.spans[syl[-1]][1]) for syl in self.syllables]

    def syllable_means(self) -> np.ndarray:
        """``n_syllables x 2``: mean f0 and mean energy over each syllable's frames."""
        return np.array([[self.f0[s:e].mean(), self.energy[s:e].mean()] for s, e in self.syllable_spans()])

    def nucleus_means(self) -> np.ndarray:
        """``n_syllables x 3``: nucleus mean f0, mean energy and duration."""
        rows = []
        for j in self.nuclei:
            s, e = self.spans[j]
            rows.append([self.f0[s:e].mean(), self.energy[s:e].mean(), e - s])
        return np.array(rows, dtype=np.float64)


def extract_features(u: Utterance, r: PhonemeSeq, spans: Sequence[tuple[int, int]] | None = None,
                     ternary: bool = False, inventory: PhonemeInventory = INVENTORY) -> SyllableFeatures:
    """Slice the f0/energy tracks of ``u`` into the syllables of the single word ``r``.

    ``spans`` defaults to the forced alignment of ``r`` (stress changes keep
    the phoneme count, so the recording's own segmentation applies).
    """
    if r.n_words != 1:
        raise ValueError("stress features are defined for isolated words")
    sylls = syllabify(r.phonemes, inventory)  # rejects words without a vowel
    if spans is None:
        mode = "oracle" if len(r) == len(u.prosody.durations) else "dp"
        spans = forced_align(u, r, mode=mode)
    spans = tuple((int(s), int(e)) for s, e in spans)
    if len(spans) != len(r) or spans[0][0] != 0 or spans[-1][1] != u.n_frames or any(
            a[1] != b[0] or a[0] >= a[1] for a, b in zip(spans, spans[1:] + ((spans[-1][1], None),))):
        raise ValueError("spans must tile the utterance, one per phoneme")
    canonical = tuple(stress_class(lv, ternary) for lv in word_levels(r.phonemes, inventory))
    return SyllableFeatures(tuple(r.phonemes), tuple(tuple(s) for s in sylls), spans,
                            u.speech[:, F0].astype(np.float64).copy(), u.speech[:, ENERGY].astype(np.float64).copy(),
                            canonical, ternary, inventory)


# --- labels and corpora ----------------------------------------------------------

@dataclass(frozen=True)
class StressLabels:
    canonical: tuple[int, ...]
    estimated: tuple[int, ...]
    error_probs: tuple[float, ...]
    threshold: float = 0.5

    def __post_init__(self):
        if not len(self.canonical) == len(self.estimated) == len(self.error_probs):
            raise ValueError("per-syllable fields differ in length")
        if not all(np.isfinite(p) and 0.0 <= p <= 1.0 for p in self.error_probs):
            raise ValueError("error probabilities must lie in [0, 1]")

    @property
    def errors(self) -> tuple[int, ...]:
        return tuple(int(c != e and p > self.threshold)
                     for c, e, p in zip(self.canonical, self.estimated, self.error_probs))

    @property
    def word_error(self) -> int:
        return int(any(self.errors))


@dataclass(frozen=True, eq=False)
class StressExample:
    """An isolated word: recording, canonical word and the realised stress levels."""

    utterance: Utterance
    word: PhonemeSeq
    realized: tuple[int, ...]        # stress level per syllable as spoken
    source: str                      # "L1", "L2" or "t2s"
    info: dict = field(default_factory=dict, compare=False)

    @property
    def canonical_levels(self) -> tuple[int, ...]:
        return tuple(word_levels(self.word.phonemes))

    def syllable_errors(self, ternary: bool = False) -> tuple[int, ...]:
        return tuple(int(stress_class(a, ternary) != stress_class(b, ternary))
                     for a, b in zip(self.realized, self.canonical_levels))

    def word_error(self, ternary: bool = False) -> int:
        return int(any(self.syllable_errors(ternary)))

    def features(self, ternary: bool = False) -> SyllableFeatures:
        return extract_features(self.utterance, self.word, self.utterance.prosody.spans(), ternary)


def moved_stress(levels: Sequence[int], rng) -> tuple[int, ...]:
    """Swap the primary stress with a random other syllable."""
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError("moving stress needs at least two syllables")
    p = levels.index(PRIMARY)
    q = int(rng.choice([k for k in range(len(levels)) if k != p]))
    levels[p], levels[q] = levels[q], levels[p]
    return tuple(levels)


def _word_seq(lexicon: Lexicon, word: str) -> PhonemeSeq:
    return PhonemeSeq.from_words([lexicon.canonical(word)])


def generate_stress_errors(lexicon: Lexicon, count: int, seed: int, speaker: SpeakerProfile = TTS_SPEAKER,
                           config: SynthConfig = TTS_CONFIG) -> list[StressExample]:
    """T2S stress augmentation: ``count`` sampled multi-syllable words, each rendered
    with correct and with moved stress (``2 * count`` examples)."""
    words = lexicon.multi_syllable()
    if not words:
        raise ValueError("the lexicon has no multi-syllable words")
    rng = np.random.default_rng([seed, 23])
    out = []
    for _ in range(count):
        w = words[int(rng.integers(len(words)))]
        r = _word_seq(lexicon, w)
        canon = tuple(word_levels(r.phonemes))
        for levels in (canon, moved_stress(canon, rng)):
            u = synthesize(restress(r, levels), speaker, int(rng.integers(2**31)), config=config)
            out.append(StressExample(u, r, levels, "t2s", {"word": w, "speaker": speaker.speaker_id}))
    return out


def realize_stress(r: PhonemeSeq, levels: Sequence[int], speaker: SpeakerProfile, seed: int,
                   contrast: float = 1.0, cue_noise: float = 0.0, config: SynthConfig = SynthConfig(),
                   inventory: PhonemeInventory = INVENTORY) -> Utterance:
    """Human-like rendering of ``r`` spoken with stress ``levels``.

    ``contrast`` in [0, 1] interpolates (geometrically) every vowel's f0,
    energy and duration between its unstressed (0) and fully stressed (1)
    realisation; ``cue_noise`` adds log-normal jitter to each cue.
    """
    if not 0.0 <= contrast <= 1.0:
        raise ValueError("contrast must lie in [0, 1]")
    spoken = restress(r, levels, inventory)
    base = sample_prosody(spoken, speaker, np.random.default_rng([seed, 4]), config, inventory)
    cue_rng = np.random.default_rng([seed, 5])
    durs, f0s, ens = list(base.durations), list(base.f0_scale), list(base.energy_scale)
    for j, sym in enumerate(spoken.phonemes):
        if not inventory.is_vowel(sym):
            continue
        lv = inventory.stress(sym)
        shrink = 1.0 - contrast
        jit = np.exp(cue_noise * cue_rng.normal(size=3))
        f0s[j] *= (config.stress_f0[0] / config.stress_f0[lv]) ** shrink * jit[0]
        ens[j] *= (config.stress_energy[0] / config.stress_energy[lv]) ** shrink * jit[1]
        durs[j] = max(1, int(round(durs[j] * STRESS_DURATION[lv] ** -shrink * jit[2])))
    prosody = Prosody(tuple(durs), tuple(f0s), tuple(ens))
    return synthesize(spoken, speaker, seed, prosody=prosody, config=config, inventory=inventory)


STRESS_SPLITS = ("train_L1", "train_L2", "test_L2")


@dataclass(frozen=True)
class StressWorldConfig:
    n_l1_speakers: int = 12
    n_l2_train_speakers: int = 6
    n_l2_test_speakers: int = 8
    n_l1: int = 150
    n_l2_train: int = 150
    n_l2_test: int = 600
    l2_error_rate: float = 0.15      # per word
    l1_contrast: tuple[float, float] = (0.6, 1.0)
    l2_contrast: tuple[float, float] = (0.15, 0.6)
    l1_cue_noise: float = 0.05
    l2_cue_noise: float = 0.12
    seed: int = 0


def make_stress_corpus(cfg: StressWorldConfig = StressWorldConfig(),
                       lexicon: Lexicon | None = None) -> dict[str, list[StressExample]]:
    """Speaker-disjoint isolated-word corpora ``train_L1``, ``train_L2`` and ``test_L2``.

    L1 speakers always stress correctly with a clear contrast; L2 speakers
    use a weaker, noisier contrast and misplace the stress at
    ``l2_error_rate``.
    """
    from .world import default_lexicon, random_profile

    lexicon = lexicon or default_lexicon()
    words = lexicon.multi_syllable()
    if not words:
        raise ValueError("the lexicon has no multi-syllable words")
    rng = np.random.default_rng([cfg.seed, 31])
    sid = 1000
    out: dict[str, list[StressExample]] = {}
    plan = (("train_L1", "L1", cfg.n_l1_speakers, cfg.n_l1), ("train_L2", "L2", cfg.n_l2_train_speakers, cfg.n_l2_train),
            ("test_L2", "L2", cfg.n_l2_test_speakers, cfg.n_l2_test))
    for split, group, n_spk, n in plan:
        speakers = []
        for _ in range(n_spk):
            lo, hi = cfg.l1_contrast if group == "L1" else cfg.l2_contrast
            speakers.append((random_profile(sid, 0.3 if group == "L1" else 0.6, rng), float(rng.uniform(lo, hi))))
            sid += 1
        noise = cfg.l1_cue_noise if group == "L1" else cfg.l2_cue_noise
        items = []
        for _ in range(n):
            prof, contrast = speakers[int(rng.integers(len(speakers)))]
            w = words[int(rng.integers(len(words)))]
            r = _word_seq(lexicon, w)
            levels = tuple(word_levels(r.phonemes))
            if group == "L2" and rng.random() < cfg.l2_error_rate:
                levels = moved_stress(levels, rng)
            u = realize_stress(r, levels, prof, int(rng.integers(2**31)), contrast, noise)
            items.append(StressExample(u, r, levels, group, {"word": w, "speaker": prof.speaker_id,
                                                             "split": split, "contrast": contrast}))
        out[split] = items
    return out


# --- classifiers -----------------------------------------------------------------

@dataclass(frozen=True)
class StressConfig:
    hidden: int = 24
    emb: int = 8
    kernel: int = 3
    epochs: int = 40
    lr: float = 5e-3
    batch_size: int = 32
    ternary: bool = False
    scope: str = "syllable"          # attention over the syllable's own frames, or "word" for all frames
    seed: int = 0

    def __post_init__(self):
        if self.scope not in ("syllable", "word"):
            raise ValueError(f"unknown attention scope {self.scope!r}")


N_FRAME_FEATS = 4   # log f0, log energy, log phoneme duration (word-relative), vowel indicator
N_NUCLEUS_FEATS = 3
MAX_SYLLABLES = 8


def _positions(n: int) -> list[int]:
    return [min(k, MAX_SYLLABLES - 1) for k in range(n)]


@dataclass
class _StressItem:
    frames: np.ndarray               # T x N_FRAME_FEATS
    frame_phon: list[int]            # base phoneme id per frame
    frame_syl: list[int]             # syllable index per frame
    nucleus: np.ndarray              # S x N_NUCLEUS_FEATS
    vowels: list[int]                # base phoneme id of each nucleus
    targets: list[int]               # realised class per syllable (-100 unknown)


def _log_rel(x: np.ndarray) -> np.ndarray:
    lx = np.log(np.clip(x, 1e-3, None))
    return lx - lx.mean()


def _base_ids(phonemes: Sequence[str], inventory: PhonemeInventory) -> list[int]:
    # the stress marker is not an input: vowels are mapped to their unstressed symbol
    return [inventory.id(inventory.with_stress(p, 0) if inventory.is_vowel(p) else p) for p in phonemes]


def _stress_item(feat: SyllableFeatures, targets: Sequence[int] | None) -> _StressItem:
    inv = feat.inventory
    durs = np.array(feat.durations, dtype=np.float64)
    logd = _log_rel(durs)
    f0 = _log_rel(feat.f0) * 5.0
    en = _log_rel(feat.energy) * 5.0
    ids = _base_ids(feat.phonemes, inv)
    frames, fphon, fsyl = [], [], []
    syl_of = {j: k for k, syl in enumerate(feat.syllables) for j in syl}
    for j, (s, e) in enumerate(feat.spans):
        vowel = float(inv.is_vowel(feat.phonemes[j]))
        for t in range(s, e):
            frames.append([f0[t], en[t], logd[j], vowel])
            fphon.append(ids[j])
            fsyl.append(syl_of[j])
    nuc = []
    for j in feat.nuclei:
        s, e = feat.spans[j]
        nuc.append([f0[s:e].mean(), en[s:e].mean(), logd[j]])
    tg = list(targets) if targets is not None else [-100] * feat.n_syllables
    return _StressItem(np.array(frames), fphon, fsyl, np.array(nuc), [ids[j] for j in feat.nuclei], tg)


def _collate(items: Sequence[_StressItem], pad: int, dtype=torch.float32):
    B = len(items)
    T = max(len(it.frames) for it in items)
    S = max(len(it.vowels) for it in items)
    x = torch.zeros(B, T, N_FRAME_FEATS, dtype=dtype)
    fphon = torch.full((B, T), pad, dtype=torch.long)
    fsyl = torch.full((B, T), -1, dtype=torch.long)
    nuc = torch.zeros(B, S, N_NUCLEUS_FEATS, dtype=dtype)
    vow = torch.full((B, S), pad, dtype=torch.long)
    tgt = torch.full((B, S), -100, dtype=torch.long)
    for b, it in enumerate(items):
        n, s = len(it.frames), len(it.vowels)
        x[b, :n] = torch.as_tensor(it.frames, dtype=dtype)
        fphon[b, :n] = torch.tensor(it.frame_phon)
        fsyl[b, :n] = torch.tensor(it.frame_syl)
        nuc[b, :s] = torch.as_tensor(it.nucleus, dtype=dtype)
        vow[b, :s] = torch.tensor(it.vowels)
        tgt[b, :s] = torch.tensor(it.targets)
    return x, fphon, fsyl, nuc, vow, tgt


class AttentionStressNet(nn.Module):
    """Syllable queries (nucleus phoneme + position) attend over frame encodings.

    Frame encodings combine the prosodic frame features with the phoneme
    embedding of the frame.  With ``scope="syllable"`` a query sees only its
    own syllable's frames; with ``scope="word"`` it sees the whole word and a
    learnable bias favours its own frames.
    """

    def __init__(self, cfg: StressConfig, n_sym: int):
        super().__init__()
        h, k = cfg.hidden, cfg.kernel
        self.pad = n_sym
        self.phon_emb = nn.Embedding(n_sym + 1, cfg.emb, padding_idx=n_sym)
        self.pos_emb = nn.Embedding(MAX_SYLLABLES, cfg.emb)
        self.frame_conv = nn.Conv1d(N_FRAME_FEATS + cfg.emb, h, k, padding=k // 2)
        self.query = nn.Linear(cfg.emb, h)
        self.key = nn.Linear(h, h)
        self.value = nn.Linear(h, h)
        self.own = nn.Parameter(torch.tensor(1.0))
        self.scope = cfg.scope
        self.mlp = nn.Sequential(nn.Linear(2 * h, h), nn.Tanh(), nn.Linear(h, n_stress_classes(cfg.ternary)))

    def forward(self, x, fphon, fsyl, nuc, vow):
        real = (fsyl >= 0)[..., None].to(x.dtype)  # padded frames must not reach real ones through the conv
        feats = torch.cat([x, self.phon_emb(fphon)], -1) * real
        enc = torch.tanh(self.frame_conv(feats.transpose(1, 2))).transpose(1, 2)
        S = vow.shape[1]
        pos = torch.arange(S).clamp(max=MAX_SYLLABLES - 1)
        q = torch.tanh(self.query(self.phon_emb(vow) + self.pos_emb(pos)[None]))           # B x S x H
        scores = torch.einsum("bsh,bth->bst", q, self.key(enc)) / math.sqrt(q.shape[-1])
        own = fsyl[:, None, :] == torch.arange(S)[None, :, None]
        if self.scope == "syllable":
            scores = scores.masked_fill(~own, -1e9)
        else:
            scores = scores + self.own * own.to(scores.dtype)
            scores = scores.masked_fill((fsyl < 0)[:, None, :], -1e9)
        att = torch.softmax(scores, -1)
        ctx = torch.einsum("bst,bth->bsh", att, self.value(enc))
        return self.mlp(torch.cat([q, ctx], -1)), att


class NucleusStressNet(nn.Module):
    """Non-attention baseline: an MLP on each nucleus's mean features, phoneme and position."""

    def __init__(self, cfg: StressConfig, n_sym: int):
        super().__init__()
        self.pad = n_sym
        self.phon_emb = nn.Embedding(n_sym + 1, cfg.emb, padding_idx=n_sym)
        self.pos_emb = nn.Embedding(MAX_SYLLABLES, cfg.emb)
        self.mlp = nn.Sequential(nn.Linear(N_NUCLEUS_FEATS + cfg.emb, cfg.hidden), nn.Tanh(),
                                 nn.Linear(cfg.hidden, n_stress_classes(cfg.ternary)))

    def forward(self, x, fphon, fsyl, nuc, vow):
        pos = torch.arange(vow.shape[1]).clamp(max=MAX_SYLLABLES - 1)
        return self.mlp(torch.cat([nuc, self.phon_emb(vow) + self.pos_emb(pos)[None]], -1)), None


@dataclass(eq=False)
class StressModel:
    net: nn.Module
    config: StressConfig
    attention: bool
    inventory: PhonemeInventory = INVENTORY
    loss_trace: list[float] = field(default_factory=list)

    @classmethod
    def create(cls, config: StressConfig = StressConfig(), attention: bool = True,
               inventory: PhonemeInventory = INVENTORY) -> "StressModel":
        with seeded(config.seed):
            net = (AttentionStressNet if attention else NucleusStressNet)(config, len(inventory))
        net.eval()
        return cls(net, config, attention, inventory)

    @property
    def n_params(self) -> int:
        return n_params(self.net)

    def metadata(self) -> dict:
        return {"format": "synthcapt-stress", "version": 1, "attention": self.attention,
                "inventory_hash": inventory_hash(self.inventory.symbols),
                "config": asdict(self.config), "loss_trace": self.loss_trace}

    def save(self, path_stem) -> None:
        save_checkpoint(path_stem, self.net, self.metadata())

    @classmethod
    def load(cls, path_stem, inventory: PhonemeInventory = INVENTORY) -> "StressModel":
        meta, state = load_checkpoint(path_stem, "synthcapt-stress", 1, inventory.symbols)
        model = cls.create(StressConfig(**meta["config"]), meta["attention"], inventory)
        model.net.load_state_dict(state)
        model.loss_trace = list(meta["loss_trace"])
        return model


def _loss(net: nn.Module, items: Sequence[_StressItem], dtype=torch.float32) -> torch.Tensor:
    x, fphon, fsyl, nuc, vow, tgt = _collate(items, net.pad, dtype)
    logits, _ = net(x, fphon, fsyl, nuc, vow)
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), tgt.reshape(-1), ignore_index=-100)


def _training_items(corpus: Sequence[StressExample], ternary: bool) -> list[_StressItem]:
    return [_stress_item(ex.features(ternary), [stress_class(lv, ternary) for lv in ex.realized]) for ex in corpus]


def train_stress_model(corpus: Sequence[StressExample], hyper: StressConfig = StressConfig(),
                       attention: bool = True, inventory: PhonemeInventory = INVENTORY) -> StressModel:
    """Cross-entropy training of the realised stress class of every syllable."""
    if {ex.word_error(hyper.ternary) for ex in corpus} != {0, 1}:
        raise TrainingError("stress corpus must contain correctly and incorrectly stressed words")
    items = _training_items(corpus, hyper.ternary)
    model = StressModel.create(hyper, attention, inventory)
    rng = np.random.default_rng(hyper.seed)
    trace: list[float] = []
    with seeded(hyper.seed):
        opt = torch.optim.Adam(model.net.parameters(), lr=hyper.lr)
        model.net.train()
        for _ in range(hyper.epochs):
            total = 0.0
            for idx in batches(len(items), hyper.batch_size, rng):
                loss = _loss(model.net, [items[i] for i in idx])
                value = check_finite(loss, trace, "stress model training")
                opt.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(model.net.parameters(), 5.0)
                opt.step()
                total += value * len(idx)
            trace.append(total / len(items))
        model.net.eval()
    model.loss_trace = trace
    return model


def stress_probs(model: StressModel, features: Sequence[SyllableFeatures], batch_size: int = 128) -> list[np.ndarray]:
    """Per-syllable class probabilities (``S x n_classes``) for every word."""
    out = []
    for k in range(0, len(features), batch_size):
        chunk = features[k:k + batch_size]
        x, fphon, fsyl, nuc, vow, _ = _collate([_stress_item(f, None) for f in chunk], model.net.pad)
        with torch.no_grad():
            logits, _ = model.net(x, fphon, fsyl, nuc, vow)
        probs = torch.softmax(logits.double(), -1).numpy()
        out.extend(probs[b, : f.n_syllables] for b, f in enumerate(chunk))
    return out


def _labels(probs: np.ndarray, feat: SyllableFeatures, threshold: float) -> StressLabels:
    canon = feat.canonical
    err = 1.0 - probs[np.arange(len(canon)), list(canon)]
    return StressLabels(canon, tuple(int(k) for k in probs.argmax(-1)), tuple(float(np.clip(e, 0, 1)) for e in err),
                        threshold)


def detect_stress_errors(model: StressModel, features: SyllableFeatures, threshold: float = 0.5) -> StressLabels:
    """Flag syllables whose estimated class differs from the canonical one with
    mismatch probability above ``threshold``."""
    if features.ternary != model.config.ternary:
        raise ValueError("feature and model stress modes differ")
    return _labels(stress_probs(model, [features])[0], features, threshold)


def word_stress_scores(model: StressModel, examples: Sequence[StressExample]) -> np.ndarray:
    """Word-level error score: the largest syllable mismatch probability."""
    feats = [ex.features(model.config.ternary) for ex in examples]
    return np.array([max(_labels(p, f, 0.5).error_probs) for p, f in zip(stress_probs(model, feats), feats)])


def stress_gradient_check(model: StressModel, examples: Sequence[StressExample], n_coords: int | None = None,
                          seed: int = 0) -> float:
    """Max relative error of the classifier loss gradients vs central differences (float64)."""
    net = copy.deepcopy(model.net).double()
    items = _training_items(examples, model.config.ternary)
    return finite_difference_check(list(net.parameters()), lambda: _loss(net, items, torch.float64),
                                   n_coords=n_coords, seed=seed)


__all__ = ["SyllableFeatures", "StressLabels", "StressExample", "StressConfig", "StressModel", "StressWorldConfig",
           "extract_features", "generate_stress_errors", "realize_stress", "make_stress_corpus", "moved_stress",
           "restress", "stress_class", "train_stress_model", "detect_stress_errors", "stress_probs",
           "word_stress_scores", "stress_gradient_check", "STRESS_SPLITS"]
