"""Word-level pronunciation-error detectors: PR-NOLIK, PR-LIK, PR-PM and the Bayes posterior.

The weakly supervised detector (WEAKLY-S) lives in :mod:`synthcapt.weakly_s`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
import numpy as np

from .phonemes import DEL, INS, INVENTORY, MATCH, SUB, PhonemeInventory, PhonemeSeq, align
from .pm import PMScore
from .recognizer import RecognitionResult
from .speech import SynthConfig, Utterance, phone_mean

MAX_EXACT_WORDS = 3


@dataclass(frozen=True)
class WordErrorProbs:
    probs: tuple[float, ...]
    threshold: float = 0.5
    stderr: tuple[float, ...] | None = None  # Monte-Carlo standard errors, when applicable

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if not all(np.isfinite(p) and -1e-12 <= p <= 1 + 1e-12 for p in probs):
            raise ValueError("word error probabilities must be finite and in [0, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def decisions(self) -> tuple[int, ...]:
        return tuple(int(p > self.threshold) for p in self.probs)

    def with_threshold(self, threshold: float) -> "WordErrorProbs":
        return replace(self, threshold=threshold)

    def __len__(self):
        return len(self.probs)


# --- recognizer-based detectors ------------------------------------------------

MISMATCH_FLOOR = 0.5


def _word_mismatch_scores(result: RecognitionResult, r: PhonemeSeq) -> np.ndarray:
    """Per-word error evidence in [0, 1] from the recognised phonemes.

    Evidence of one canonical position:

    * matched: ``0.5 * (1 - likelihood)`` of the recognised symbol (< 0.5);
    * substituted, or followed by an insertion: ``0.5 + 0.5 * likelihood``
      of the offending recognised symbol (> 0.5);
    * deleted: ``0.5 + 0.5 * (1 - max_t p_t(canonical))``.

    The word score is the maximum over its positions, so any edit lands above
    0.5 and a confident edit close to 1.
    """
    decoded = result.decoded.phonemes
    lik = result.per_phoneme_likelihood
    probs = result.posteriorgram.probs
    ev = np.zeros(len(r))
    if not decoded:
        return np.ones(r.n_words)

    def deletion(i):
        seen = probs[:, INVENTORY.id(r.phonemes[i])].max()
        return MISMATCH_FLOOR + (1 - MISMATCH_FLOOR) * (1.0 - seen)

    last = 0
    for op in align(r.phonemes, decoded, inventory=None).ops:
        if op.op == MATCH:
            ev[op.i] = max(ev[op.i], MISMATCH_FLOOR * (1.0 - lik[op.j]))
        elif op.op == SUB:
            ev[op.i] = max(ev[op.i], MISMATCH_FLOOR + (1 - MISMATCH_FLOOR) * lik[op.j])
        elif op.op == DEL:
            ev[op.i] = max(ev[op.i], deletion(op.i))
        elif op.op == INS:
            ev[last] = max(ev[last], MISMATCH_FLOOR + (1 - MISMATCH_FLOOR) * lik[op.j])
        if op.i is not None:
            last = op.i
    return np.array([ev[s:e].max() for _, s, e in r.word_spans])


def detect_prnolik(result: RecognitionResult, r: PhonemeSeq) -> WordErrorProbs:
    """Flag a word iff the alignment of recognised to canonical phonemes edits inside it."""
    scores = _word_mismatch_scores(result, r)
    return WordErrorProbs(tuple(float(s > MISMATCH_FLOOR) for s in scores), threshold=0.5)


def detect_prlik(result: RecognitionResult, r: PhonemeSeq, threshold: float = MISMATCH_FLOOR) -> WordErrorProbs:
    """Soft-threshold variant of PR-NOLIK: edits are weighted by recogniser confidence.

    At ``threshold = 0.5`` the decisions coincide with PR-NOLIK; higher
    thresholds keep only confidently recognised edits, lower ones also flag
    matched phonemes recognised with low likelihood.
    """
    return WordErrorProbs(tuple(_word_mismatch_scores(result, r)), threshold=threshold)


def detect_prpm(result: RecognitionResult, pm_score: PMScore, r: PhonemeSeq,
                threshold: float = 0.5) -> WordErrorProbs:
    """Geometric mean of the PR-LIK score and 1 - per-word pi."""
    if pm_score.per_word_pi is None or len(pm_score.per_word_pi) != r.n_words:
        raise ValueError("PM score lacks a per-word factorisation for this sequence")
    lik = _word_mismatch_scores(result, r)
    pi = np.clip(np.asarray(pm_score.per_word_pi), 0.0, 1.0)
    return WordErrorProbs(tuple(np.sqrt(lik * (1.0 - pi))), threshold=threshold)


# --- Bayes posterior -------------------------------------------------------------

@dataclass(frozen=True)
class BayesPrior:
    rho: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")


@dataclass(frozen=True)
class BayesResult:
    word_probs: WordErrorProbs
    joint: dict | None  # e hypothesis (tuple of 0/1) -> posterior, exact mode only
    mode: str


def position_loglik(u: Utterance, sigma: float | None = None, config: SynthConfig | None = None,
                    inventory: PhonemeInventory = INVENTORY) -> np.ndarray:
    """``n x V`` table of log N(frames of position j | mean of symbol x, sigma^2 I).

    Frame spans, speaker and per-phoneme prosody multipliers come from the
    utterance's recorded prosody (substitutions keep the phoneme count).
    """
    sigma = u.sigma if sigma is None else sigma
    if sigma <= 0:
        raise ValueError("the Gaussian likelihood needs sigma > 0")
    config = config or SynthConfig(noise_sigma=sigma)
    spans = u.prosody.spans()
    out = np.empty((len(spans), len(inventory)))
    for j, (s, e) in enumerate(spans):
        frames = u.speech[s:e]
        for k, sym in enumerate(inventory.symbols):
            mu = phone_mean(sym, u.speaker, u.prosody.f0_scale[j], u.prosody.energy_scale[j], config, inventory)
            sq = ((frames - mu) ** 2).sum()
            out[j, k] = -0.5 * sq / sigma**2 - frames.size * np.log(np.sqrt(2 * np.pi) * sigma)
    return out


def word_log_likelihoods(ll: np.ndarray, r: PhonemeSeq, p_sub: float,
                         inventory: PhonemeInventory = INVENTORY) -> np.ndarray:
    """``W x 2`` table of log p(s_w | e_w) under substitution-only perturbation.

    ``e_w = 0``: the word is realised as ``r``.  ``e_w = 1``: at least one
    position substituted, r'_w drawn from the perturbation distribution
    conditioned on a change.
    """
    if not 0.0 < p_sub < 1.0:
        raise ValueError("p_sub must lie in (0, 1)")
    V = len(inventory)
    ids = inventory.ids(r.phonemes)
    out = np.empty((r.n_words, 2))
    for w, s, e in r.word_spans:
        n = e - s
        log_keep = 0.0
        scale = 0.0
        d0, d1 = 1.0, 0.0  # sums over prefixes with no change / at least one change
        for j in range(s, e):
            c = ll[j].max()
            like = np.exp(ll[j] - c)
            a = (1 - p_sub) * like[ids[j]]
            b = p_sub / (V - 1) * (like.sum() - like[ids[j]])
            d0, d1 = d0 * a, d1 * (a + b) + d0 * b
            scale += c
            log_keep += ll[j, ids[j]]
        out[w, 0] = log_keep
        p_change = -np.expm1(n * np.log1p(-p_sub))
        out[w, 1] = np.log(d1) + scale - np.log(p_change) if d1 > 0 else -np.inf
    return out


def bayes_enumerate(u: Utterance, r: PhonemeSeq, prior: BayesPrior = BayesPrior(), p_sub: float = 0.2,
                    sigma: float | None = None, n_samples: int = 4000, seed: int = 0,
                    inventory: PhonemeInventory = INVENTORY) -> BayesResult:
    """Posterior p(e | s, r) ∝ p(e | r) p(s | e, r) per word.

    Exact for up to three words (explicit table over all 2^W hypotheses);
    longer utterances use importance sampling from the prior and report
    standard errors.
    """
    if len(r) != len(u.prosody.durations):
        raise ValueError("substitution-only posterior needs r to match the utterance's phoneme count")
    inventory.check(r.phonemes)
    wl = word_log_likelihoods(position_loglik(u, sigma, inventory=inventory), r, p_sub, inventory)
    log_prior = np.log([1 - prior.rho, prior.rho])
    W = r.n_words
    if W <= MAX_EXACT_WORDS:
        hyps = list(itertools.product((0, 1), repeat=W))
        logp = np.array([sum(log_prior[e] + wl[w, e] for w, e in enumerate(h)) for h in hyps])
        post = np.exp(logp - np.logaddexp.reduce(logp))
        marg = [float(sum(p for h, p in zip(hyps, post) if h[w])) for w in range(W)]
        return BayesResult(WordErrorProbs(tuple(marg)), dict(zip(hyps, post.tolist())), "exact")
    rng = np.random.default_rng(seed)
    e = (rng.random((n_samples, W)) < prior.rho).astype(int)
    logw = wl[np.arange(W)[None, :], e].sum(axis=1)
    wts = np.exp(logw - logw.max())
    wts /= wts.sum()
    marg = (wts[:, None] * e).sum(axis=0)
    # delta-method standard error of a self-normalised importance estimate
    se = np.sqrt(((wts[:, None] * (e - marg[None, :])) ** 2).sum(axis=0))
    return BayesResult(WordErrorProbs(tuple(marg), stderr=tuple(se.tolist())), None, "monte-carlo")


__all__ = ["WordErrorProbs", "detect_prnolik", "detect_prlik", "detect_prpm", "BayesPrior", "BayesResult",
           "bayes_enumerate", "position_loglik", "word_log_likelihoods"]
