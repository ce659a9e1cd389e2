"""Toy parametric speech domain: synthesis (T2S), conversion (S2S), forced alignment.

Frames are 10-dimensional: 8 mel-like bands, one f0 track and one energy
track.  Each phoneme renders ``duration`` frames of its band prototype plus
the speaker's timbre offset; vowels additionally carry stress-dependent
f0/energy multipliers.  Consonant f0/energy sit at the speaker baseline, which
keeps stressed syllables strictly above unstressed ones without noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .injector import PerturbationConfig, TrainingExample, labels_on_perturbed, perturb_with_ops
from .phonemes import (asset_path, DEL, INS, INVENTORY, MATCH, SUB, Alignment, EditOp, ErrorLabels,
                       PhonemeInventory, PhonemeSeq, align, project_errors)

N_BANDS = 8
N_FEATS = 10
F0, ENERGY = 8, 9
TIMBRE_DIM = 4
PROTOTYPE_VERSION = 1

BASE_DURATION = {"consonant": 4, "vowel": 6}
STRESS_DURATION = {0: 1.0, 1: 1.5, 2: 1.25}
# intrinsic vowel properties (all <= 1 so unstressed vowels never exceed the consonant baseline)
INTRINSIC_DURATION = {"iy": 1.15, "uw": 1.15, "ay": 1.2, "ih": 0.85, "ax": 0.8, "ah": 1.0}
INTRINSIC_PITCH = {"iy": 1.0, "uw": 1.0, "ih": 1.0, "ax": 0.98, "ah": 0.97, "ay": 0.97}


@lru_cache(maxsize=None)
def band_prototypes() -> dict[str, np.ndarray]:
    text = asset_path(f"prototypes_v{PROTOTYPE_VERSION}.json").read_text()
    data = json.loads(text)
    if data["version"] != PROTOTYPE_VERSION:
        raise RuntimeError("prototype asset version mismatch")
    out = {}
    for k, v in data["bands"].items():
        arr = np.asarray(v, dtype=np.float64)
        arr.setflags(write=False)
        out[k] = arr
    return out


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: int
    timbre: tuple[float, ...] = (0.0,) * TIMBRE_DIM
    base_f0: float = 1.0
    rate: float = 1.0
    max_timbre_norm: float = field(default=3.0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "timbre", tuple(float(x) for x in self.timbre))
        if len(self.timbre) != TIMBRE_DIM:
            raise ValueError(f"timbre must have {TIMBRE_DIM} entries")
        if not 0.5 <= self.rate <= 2.0:
            raise ValueError(f"rate {self.rate} outside [0.5, 2.0]")
        if np.linalg.norm(self.timbre) > self.max_timbre_norm:
            raise ValueError("timbre norm exceeds the configured bound")
        if self.base_f0 <= 0:
            raise ValueError("base_f0 must be positive")

    def band_offset(self) -> np.ndarray:
        return np.repeat(np.asarray(self.timbre), N_BANDS // TIMBRE_DIM)

    def to_dict(self) -> dict:
        return {"speaker_id": self.speaker_id, "timbre": list(self.timbre),
                "base_f0": self.base_f0, "rate": self.rate}

    @classmethod
    def from_dict(cls, d: dict) -> "SpeakerProfile":
        return cls(d["speaker_id"], tuple(d["timbre"]), d["base_f0"], d["rate"])


NEUTRAL_SPEAKER = SpeakerProfile(0)
TTS_SPEAKER = SpeakerProfile(-1, (0.0,) * TIMBRE_DIM, 1.0, 1.0)


@dataclass(frozen=True)
class SynthConfig:
    noise_sigma: float = 0.1
    stress_f0: tuple[float, float, float] = (0.95, 1.3, 1.12)
    stress_energy: tuple[float, float, float] = (0.95, 1.3, 1.12)
    duration_jitter: float = 0.15
    pitch_jitter: float = 0.03
    energy_jitter: float = 0.03
    intrinsic: bool = True

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        lo = min(INTRINSIC_PITCH.values()) if self.intrinsic else 1.0
        for name, table, jit in (("f0", self.stress_f0, self.pitch_jitter),
                                 ("energy", self.stress_energy, self.energy_jitter)):
            # unstressed vowels stay below the consonant baseline (1.0), stressed above
            if table[0] * (1 + jit) >= 1.0 or table[1] * lo * (1 - jit) <= 1.0:
                raise ValueError(f"{name} stress contrast too weak for the configured jitter")

    @property
    def deterministic(self) -> bool:
        return self.duration_jitter == self.pitch_jitter == self.energy_jitter == 0.0


TTS_CONFIG = SynthConfig(duration_jitter=0.0, pitch_jitter=0.0, energy_jitter=0.0)


@dataclass(frozen=True)
class Prosody:
    """Per-phoneme frame counts plus f0/energy multipliers (stress is applied on top)."""

    durations: tuple[int, ...]
    f0_scale: tuple[float, ...]
    energy_scale: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "durations", tuple(int(d) for d in self.durations))
        object.__setattr__(self, "f0_scale", tuple(float(x) for x in self.f0_scale))
        object.__setattr__(self, "energy_scale", tuple(float(x) for x in self.energy_scale))
        if not (len(self.durations) == len(self.f0_scale) == len(self.energy_scale)):
            raise ValueError("prosody vectors differ in length")
        if any(d < 1 for d in self.durations):
            raise ValueError("durations must be positive")

    @property
    def n_frames(self) -> int:
        return sum(self.durations)

    def spans(self) -> list[tuple[int, int]]:
        ends = np.cumsum(self.durations)
        return [(int(e - d), int(e)) for d, e in zip(self.durations, ends)]

    def to_dict(self) -> dict:
        return {"durations": list(self.durations), "f0_scale": list(self.f0_scale),
                "energy_scale": list(self.energy_scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Prosody":
        return cls(tuple(d["durations"]), tuple(d["f0_scale"]), tuple(d["energy_scale"]))


@dataclass(frozen=True, eq=False)
class Utterance:
    speech: np.ndarray
    canonical: PhonemeSeq
    speaker: SpeakerProfile
    prosody: Prosody
    noise_seed: int
    sigma: float = 0.1
    accent: tuple | None = None  # per phoneme: (blend target or None, weight)

    def __post_init__(self):
        if self.speech.ndim != 2 or self.speech.shape[1] != N_FEATS:
            raise ValueError("speech must be a T x 10 frame matrix")
        if self.speech.shape[0] != self.prosody.n_frames:
            raise ValueError("frame count does not match prosody durations")
        if not np.all(np.isfinite(self.speech)):
            raise ValueError("non-finite speech features")

    @property
    def n_frames(self) -> int:
        return self.speech.shape[0]

    def sidecar(self) -> dict:
        return {
            "format": "synthcapt-utterance",
            "version": 1,
            "canonical": str(self.canonical),
            "speaker": self.speaker.to_dict(),
            "prosody": self.prosody.to_dict(),
            "noise_seed": self.noise_seed,
            "sigma": self.sigma,
            "accent": [list(a) for a in self.accent] if self.accent else None,
            "shape": list(self.speech.shape),
        }

    def save(self, path_stem) -> None:
        """Write ``<stem>.npy`` (float64 frames) and ``<stem>.json`` (metadata)."""
        stem = Path(path_stem)
        np.save(stem.with_suffix(".npy"), self.speech)
        stem.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path_stem) -> "Utterance":
        stem = Path(path_stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        if meta.get("format") != "synthcapt-utterance" or meta.get("version") != 1:
            raise ValueError(f"{stem}: unsupported utterance format")
        accent = tuple(tuple(a) for a in meta["accent"]) if meta["accent"] else None
        return cls(np.load(stem.with_suffix(".npy")), PhonemeSeq.parse(meta["canonical"]),
                   SpeakerProfile.from_dict(meta["speaker"]), Prosody.from_dict(meta["prosody"]),
                   meta["noise_seed"], meta["sigma"], accent)


# --- synthesis -------------------------------------------------------------

def _split_seed(seed) -> tuple[np.random.Generator, np.random.Generator]:
    pros, noise = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(pros), np.random.default_rng(noise)


def nominal_duration(sym: str, rate: float = 1.0, config: SynthConfig = SynthConfig(),
                     multiplier: float = 1.0, inventory: PhonemeInventory = INVENTORY) -> int:
    if not inventory.is_vowel(sym):
        return max(1, int(round(BASE_DURATION["consonant"] * rate * multiplier)))
    intr = INTRINSIC_DURATION[inventory.base(sym)] if config.intrinsic else 1.0
    base = BASE_DURATION["vowel"] * intr * rate * multiplier
    unstressed = max(1, int(round(base)))
    level = inventory.stress(sym)
    if level == 0:
        return unstressed
    return max(int(round(base * STRESS_DURATION[level])), unstressed + 1)


def sample_prosody(r: PhonemeSeq, speaker: SpeakerProfile, rng, config: SynthConfig = SynthConfig(),
                   inventory: PhonemeInventory = INVENTORY) -> Prosody:
    n = len(r)
    dj = rng.uniform(1 - config.duration_jitter, 1 + config.duration_jitter, size=n)
    fj = rng.uniform(1 - config.pitch_jitter, 1 + config.pitch_jitter, size=n)
    ej = rng.uniform(1 - config.energy_jitter, 1 + config.energy_jitter, size=n)
    durs, f0s, ens = [], [], []
    for j, sym in enumerate(r.phonemes):
        durs.append(nominal_duration(sym, speaker.rate, config, dj[j], inventory))
        vowel = inventory.is_vowel(sym)
        f0s.append(float(fj[j]) if vowel else 1.0)
        ens.append(float(ej[j]) if vowel else 1.0)
    return Prosody(tuple(durs), tuple(f0s), tuple(ens))


def phone_mean(sym: str, speaker: SpeakerProfile, f0_mult: float = 1.0, energy_mult: float = 1.0,
               config: SynthConfig = SynthConfig(), inventory: PhonemeInventory = INVENTORY,
               blend: tuple | None = None) -> np.ndarray:
    """Noise-free frame vector of one phoneme."""
    protos = band_prototypes()
    bands = protos[inventory.base(sym)]
    if blend is not None and blend[0] is not None and blend[1] > 0:
        target, w = blend
        bands = (1.0 - w) * bands + w * protos[inventory.base(target)]
    out = np.empty(N_FEATS)
    out[:N_BANDS] = bands + speaker.band_offset()
    if inventory.is_vowel(sym):
        level = inventory.stress(sym)
        intr = INTRINSIC_PITCH[inventory.base(sym)] if config.intrinsic else 1.0
        out[F0] = speaker.base_f0 * config.stress_f0[level] * intr * f0_mult
        out[ENERGY] = config.stress_energy[level] * intr * energy_mult
    else:
        out[F0] = speaker.base_f0
        out[ENERGY] = 1.0
    return out


def frame_means(r: PhonemeSeq, speaker: SpeakerProfile, prosody: Prosody,
                config: SynthConfig = SynthConfig(), accent=None,
                inventory: PhonemeInventory = INVENTORY) -> np.ndarray:
    rows = []
    for j, sym in enumerate(r.phonemes):
        mu = phone_mean(sym, speaker, prosody.f0_scale[j], prosody.energy_scale[j], config, inventory,
                        accent[j] if accent else None)
        rows.append(np.broadcast_to(mu, (prosody.durations[j], N_FEATS)))
    return np.concatenate(rows, axis=0)


def synthesize(r: PhonemeSeq, speaker: SpeakerProfile, seed: int, *, prosody: Prosody | None = None,
               config: SynthConfig = SynthConfig(), accent=None,
               inventory: PhonemeInventory = INVENTORY) -> Utterance:
    """Render ``r`` for ``speaker``; prosody is sampled from ``seed`` unless given."""
    inventory.check(r.phonemes)
    if accent is not None and len(accent) != len(r):
        raise ValueError("accent must have one entry per phoneme")
    pros_rng, noise_rng = _split_seed(seed)
    if prosody is None:
        prosody = sample_prosody(r, speaker, pros_rng, config, inventory)
    elif len(prosody.durations) != len(r):
        raise ValueError("prosody does not match the phoneme sequence")
    means = frame_means(r, speaker, prosody, config, accent, inventory)
    speech = means + config.noise_sigma * noise_rng.normal(size=means.shape)
    accent = tuple(tuple(a) for a in accent) if accent is not None else None
    return Utterance(speech, r, speaker, prosody, int(seed), config.noise_sigma, accent)


# --- forced alignment ----------------------------------------------------------

class AlignmentFailure(RuntimeError):
    pass


def forced_align(u: Utterance, r: PhonemeSeq | None = None, mode: str = "auto",
                 config: SynthConfig = SynthConfig()) -> list[tuple[int, int]]:
    """Per-phoneme ``(start, end)`` frame spans.

    ``oracle`` returns the recorded prosody (requires ``r`` to be the
    generating sequence); ``dp`` segments the frames by dynamic programming
    against nominal phoneme means; ``auto`` picks oracle when possible.
    """
    r = u.canonical if r is None else r
    if mode == "auto":
        mode = "oracle" if tuple(r.phonemes) == tuple(u.canonical.phonemes) else "dp"
    if mode == "oracle":
        if len(r) != len(u.prosody.durations):
            raise AlignmentFailure("oracle alignment needs the generating sequence")
        return u.prosody.spans()
    if mode != "dp":
        raise ValueError(f"unknown mode {mode!r}")
    return _dp_align(u.speech, r, u.speaker, config)


def _dp_align(speech: np.ndarray, r: PhonemeSeq, speaker: SpeakerProfile, config: SynthConfig):
    T, n = speech.shape[0], len(r)
    if T < n:
        raise AlignmentFailure(f"{T} frames cannot host {n} phonemes")
    means = np.stack([phone_mean(s, speaker, config=config) for s in r.phonemes])
    cost = ((speech[:, None, :] - means[None, :, :]) ** 2).sum(-1)  # T x n
    inf = np.inf
    acc = np.full((T, n), inf)
    back = np.zeros((T, n), dtype=np.int8)  # 0 stay, 1 advance
    acc[0, 0] = cost[0, 0]
    for t in range(1, T):
        stay = acc[t - 1]
        adv = np.concatenate([[inf], acc[t - 1, :-1]])
        take_adv = adv < stay
        acc[t] = np.where(take_adv, adv, stay) + cost[t]
        back[t] = take_adv
    if not np.isfinite(acc[T - 1, n - 1]):
        raise AlignmentFailure("no feasible alignment")
    ends = [T] * n
    j = n - 1
    for t in range(T - 1, 0, -1):
        if back[t, j]:
            ends[j - 1] = t
            j -= 1
    starts = [0] + ends[:-1]
    return list(zip(starts, ends))


# --- speech-to-speech ----------------------------------------------------------

def _resample(track: np.ndarray, n: int) -> np.ndarray:
    if len(track) == n:
        return track.copy()
    src = np.linspace(0.0, 1.0, len(track))
    dst = np.linspace(0.0, 1.0, n)
    return np.interp(dst, src, track)


def s2s_convert(u: Utterance, r: PhonemeSeq, r_prime: PhonemeSeq, *, ops: Alignment | None = None,
                seed: int | None = None, config: SynthConfig | None = None,
                inventory: PhonemeInventory = INVENTORY) -> Utterance:
    """Re-render ``u`` with phonemes ``r_prime`` keeping durations, timbre and f0/energy contours.

    Substituted positions inherit the original duration, insertions get the
    nominal duration for the speaker's rate, deletions drop their frames.
    Band noise is re-drawn from ``seed`` (default: the source's noise seed),
    so ``r_prime == r`` with the shared seed reproduces ``u`` exactly.
    """
    if len(r_prime) == 0:
        raise ValueError("empty target sequence")
    inventory.check(r_prime.phonemes)
    config = config or replace(SynthConfig(), noise_sigma=u.sigma)
    seed = u.noise_seed if seed is None else seed
    spans = forced_align(u, r)
    if ops is None:
        ops = _positional_ops(r, r_prime)
    durs, f0m, enm = [], [], []
    for op in ops.ops:
        if op.op == DEL:
            continue
        if op.op == INS:
            durs.append(nominal_duration(r_prime[op.j], u.speaker.rate, config, inventory=inventory))
            f0m.append(1.0)
            enm.append(1.0)
        else:
            s, e = spans[op.i]
            durs.append(e - s)
            f0m.append(u.prosody.f0_scale[op.i])
            enm.append(u.prosody.energy_scale[op.i])
    prosody = Prosody(tuple(durs), tuple(f0m), tuple(enm))
    means = frame_means(r_prime, u.speaker, prosody, config, None, inventory)
    _, noise_rng = _split_seed(seed)
    noise = noise_rng.normal(size=means.shape)
    speech = np.empty_like(means)
    speech[:, :N_BANDS] = means[:, :N_BANDS] + config.noise_sigma * noise[:, :N_BANDS]
    speech[:, F0] = _resample(u.speech[:, F0], len(means))
    speech[:, ENERGY] = _resample(u.speech[:, ENERGY], len(means))
    return Utterance(speech, r_prime, u.speaker, prosody, int(seed), config.noise_sigma, None)


def _positional_ops(r: PhonemeSeq, r_prime: PhonemeSeq) -> Alignment:
    if len(r) == len(r_prime):
        ops = tuple(EditOp(MATCH if a == b else SUB, k, k) for k, (a, b) in enumerate(zip(r, r_prime)))
        return Alignment(ops, sum(o.op != MATCH for o in ops))
    return align(r, r_prime)


# --- four-way generation ----------------------------------------------------------

def make_quadruple(u: Utterance, r: PhonemeSeq, cfg: PerturbationConfig, mode: str = "s2s", rng=None,
                   seed: int | None = None, tts_speaker: SpeakerProfile = TTS_SPEAKER,
                   tts_config: SynthConfig = TTS_CONFIG) -> list[TrainingExample]:
    """{e_noerr,s,r}, {e_err,s,r'}, {e_noerr,s',r'}, {e_err,s',r} for one utterance."""
    if mode not in ("t2s", "s2s"):
        raise ValueError(f"mode must be t2s or s2s, got {mode!r}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(cfg.seed if rng is None else rng)
    r_prime, ops = perturb_with_ops(r, cfg, rng)
    seed = int(rng.integers(2**31)) if seed is None else seed
    if mode == "t2s":
        s_prime = synthesize(r_prime, tts_speaker, seed, config=tts_config)
    else:
        s_prime = s2s_convert(u, r, r_prime, ops=ops, seed=seed)
    err_on_rprime = labels_on_perturbed(r, r_prime, ops)
    err_on_r = project_errors(r, r_prime, ops)
    return [
        TrainingExample(ErrorLabels.no_error(r), u, r, "original"),
        TrainingExample(err_on_rprime, u, r_prime, "p2p"),
        TrainingExample(ErrorLabels.no_error(r_prime), s_prime, r_prime, mode),
        TrainingExample(err_on_r, s_prime, r, mode),
    ]


def word_frame_spans(u: Utterance, r: PhonemeSeq | None = None) -> list[tuple[int, int]]:
    spans = forced_align(u, r)
    r = u.canonical if r is None else r
    return [(spans[s][0], spans[e - 1][1]) for _, s, e in r.word_spans]


__all__: Sequence[str] = [
    "SpeakerProfile", "Prosody", "Utterance", "SynthConfig", "synthesize", "forced_align",
    "s2s_convert", "make_quadruple", "TTS_SPEAKER", "TTS_CONFIG", "NEUTRAL_SPEAKER",
    "AlignmentFailure", "frame_means", "phone_mean", "band_prototypes",
]
