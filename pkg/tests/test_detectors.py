import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from synthcapt.detectors import (BayesPrior, WordErrorProbs, bayes_enumerate, detect_prlik, detect_prnolik,
                                 detect_prpm, position_loglik, word_log_likelihoods)
from synthcapt.metrics import pr_curve
from synthcapt.phonemes import INVENTORY, PhonemeSeq
from synthcapt.pm import PMScore
from synthcapt.recognizer import PhonemePosteriorgram, greedy_decode
from synthcapt.speech import SynthConfig, synthesize
from synthcapt.world import default_lexicon, random_profile

from conftest import SYMBOLS, phoneme_seqs, random_bayes_instance
from oracles.bayes_bruteforce import brute_force_posterior

C = INVENTORY.n_classes
BLANK = INVENTORY.blank_id


def _result(symbols, liks=None, extra_blank=True):
    """Recognition result whose best path emits ``symbols`` with the given frame posteriors."""
    liks = [1.0] * len(symbols) if liks is None else liks
    rows = []
    for sym, p in zip(symbols, liks):
        row = np.full(C, (1 - p) / (C - 1))
        row[INVENTORY.id(sym)] = p
        rows.append(row)
        if extra_blank:
            b = np.zeros(C)
            b[BLANK] = 1.0
            rows.append(b)
    return greedy_decode(PhonemePosteriorgram(np.array(rows)))


@st.composite
def recognitions(draw, r):
    """Decoded sequences near ``r`` with random confidences."""
    out = []
    for sym in r.phonemes:
        kind = draw(st.sampled_from(["keep", "keep", "sub", "del", "ins"]))
        if kind in ("keep", "ins"):
            out.append(sym)
        if kind == "sub":
            out.append(draw(st.sampled_from([s for s in SYMBOLS if s != sym])))
        if kind == "ins":
            out.append(draw(st.sampled_from(SYMBOLS)))
    if not out:
        out = [r.phonemes[0]]
    liks = draw(st.lists(st.floats(0.3, 1.0), min_size=len(out), max_size=len(out)))
    return _result(out, liks)


# --- WordErrorProbs -----------------------------------------------------------------------

@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(0, 1))
def test_decisions_rule(probs, thr):
    w = WordErrorProbs(tuple(probs), thr)
    assert w.decisions == tuple(int(p > thr) for p in probs)


def test_word_error_probs_validation():
    with pytest.raises(ValueError):
        WordErrorProbs((1.5,))
    with pytest.raises(ValueError):
        WordErrorProbs((float("nan"),))


# --- PR-NOLIK / PR-LIK ------------------------------------------------------------------------

def test_prnolik_examples():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    assert detect_prnolik(_result(r.phonemes), r).probs == (0.0, 0.0)
    assert detect_prnolik(_result(["m", "ay0", "n", "uw1", "s"]), r).probs == (1.0, 0.0)
    lex = default_lexicon()
    canonical = lex.sentence(["enough", "remind"])
    spoken = lex.sentence(["enough", "remind"], [1, 0])
    assert detect_prnolik(_result(spoken.phonemes), canonical).probs == (1.0, 0.0)


def test_prlik_examples():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    assert detect_prlik(_result(r.phonemes), r).probs == (0.0, 0.0)
    res = _result(["m", "ay0", "n", "uw1", "s"], [1.0, 0.9, 1.0, 1.0, 1.0])
    score = detect_prlik(res, r).probs[0]
    # a confident mismatch dominates: far above any matched word, and flagged at the default threshold
    assert score == pytest.approx(0.95) and detect_prlik(res, r).decisions == (1, 0)


def test_prlik_traces_more_operating_points_than_prnolik():
    lex = default_lexicon()
    rng = np.random.default_rng(0)
    lik_scores, nolik_scores, labels = [], [], []
    for _ in range(40):
        r = lex.sentence([lex.words[i] for i in rng.integers(len(lex), size=2)])
        phon = list(r.phonemes)
        err = [0] * r.n_words
        if rng.random() < 0.5:
            j = int(rng.integers(len(phon)))
            phon[j] = str(rng.choice([s for s in SYMBOLS if s != phon[j]]))
            err[r.word_of(j)] = 1
        res = _result(phon, list(rng.uniform(0.4, 1.0, size=len(phon))))
        lik_scores += detect_prlik(res, r).probs
        nolik_scores += detect_prnolik(res, r).probs
        labels += err
    _, p_lik, r_lik = pr_curve(lik_scores, labels)
    _, p_nolik, r_nolik = pr_curve(nolik_scores, labels)
    assert len(set(zip(p_lik, r_lik))) >= 2
    assert len(set(nolik_scores)) == 2  # one non-trivial operating point only


@given(phoneme_seqs(), st.data())
def test_prnolik_is_prlik_at_the_mismatch_floor(r, data):
    res = data.draw(recognitions(r))
    lik = detect_prlik(res, r)
    assert lik.decisions == detect_prnolik(res, r).decisions
    assert len(lik) == r.n_words


@given(phoneme_seqs(), st.data(), st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotonicity(r, data, t1, t2):
    lo, hi = sorted((t1, t2))
    res = data.draw(recognitions(r))
    pi = data.draw(st.lists(st.floats(0, 1), min_size=r.n_words, max_size=r.n_words))
    pm = PMScore(0.5, tuple(pi), np.log(0.5))
    for det in (detect_prnolik(res, r), detect_prlik(res, r), detect_prpm(res, pm, r)):
        assert sum(det.with_threshold(hi).decisions) <= sum(det.with_threshold(lo).decisions)


# --- PR-PM ---------------------------------------------------------------------------------------

@given(phoneme_seqs(), st.data())
def test_prpm_is_geometric_mean(r, data):
    res = data.draw(recognitions(r))
    pi = data.draw(st.lists(st.floats(0, 1), min_size=r.n_words, max_size=r.n_words))
    lik = np.array(detect_prlik(res, r).probs)
    got = np.array(detect_prpm(res, PMScore(0.5, tuple(pi), np.log(0.5)), r).probs)
    assert np.allclose(got, np.sqrt(lik * (1 - np.array(pi))), atol=1e-12)
    # pi = 1 (a fully native-plausible word) can only lower the score
    full = np.array(detect_prpm(res, PMScore(1.0, (1.0,) * r.n_words, 0.0), r).probs)
    assert np.all(full <= lik + 1e-12) and np.all(full == 0)


def test_prpm_examples():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    res = _result(r.phonemes)
    assert detect_prpm(res, PMScore(1.0, (1.0, 1.0), 0.0), r).probs == (0.0, 0.0)
    lex = default_lexicon()
    canonical = lex.sentence(["enough"])
    variant = _result(lex["enough"][1], [0.9] * 4)
    lik = detect_prlik(variant, canonical).probs[0]
    pm = detect_prpm(variant, PMScore(0.6, (0.6,), np.log(0.6)), canonical).probs[0]
    assert lik > 0.5 and pm < lik
    with pytest.raises(ValueError):
        detect_prpm(res, PMScore(0.5, (0.5,), np.log(0.5)), r)


# --- Bayes enumeration -------------------------------------------------------------------------

@st.composite
def bayes_instances(draw):
    n_words = draw(st.integers(1, 3))
    words = [draw(st.lists(st.sampled_from(SYMBOLS), min_size=1, max_size=2)) for _ in range(n_words)]
    r = PhonemeSeq.from_words(words)
    if len(r) > 4:
        r = PhonemeSeq.from_words([w[:1] for w in words])
    sigma = draw(st.sampled_from([0.5, 1.0, 2.0, 4.0]))
    spk = random_profile(draw(st.integers(1, 1000)), 0.5, np.random.default_rng(draw(st.integers(0, 2**31))))
    spoken = list(r.phonemes)
    for j in draw(st.lists(st.integers(0, len(r) - 1), max_size=2, unique=True)):
        spoken[j] = draw(st.sampled_from([s for s in SYMBOLS if s != spoken[j]]))
    u = synthesize(PhonemeSeq(tuple(spoken), r.word_spans), spk, draw(st.integers(0, 2**31)),
                   config=SynthConfig(noise_sigma=sigma))
    return u, r, draw(st.floats(0.05, 0.5)), draw(st.floats(0.05, 0.5)), sigma


def test_bayes_matches_brute_force_on_50_instances():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        u, r, rho, p_sub, sigma = random_bayes_instance(rng)
        res = bayes_enumerate(u, r, BayesPrior(rho), p_sub=p_sub, sigma=sigma)
        marg, joint = brute_force_posterior(u, r, rho, p_sub, sigma)
        assert res.mode == "exact"
        assert abs(sum(res.joint.values()) - 1.0) < 1e-9
        for e, p in joint.items():
            worst = max(worst, abs(res.joint[e] - p))
        worst = max(worst, max(abs(a - b) for a, b in zip(res.word_probs.probs, marg)))
    assert worst < 1e-9


@given(bayes_instances())
def test_bayes_posterior_normalises(inst):
    u, r, rho, p_sub, sigma = inst
    res = bayes_enumerate(u, r, BayesPrior(rho), p_sub=p_sub, sigma=sigma)
    assert abs(sum(res.joint.values()) - 1.0) < 1e-9
    assert len(res.word_probs) == r.n_words


def test_bayes_low_noise_examples():
    spk = random_profile(5, 0.5, np.random.default_rng(5))
    r = PhonemeSeq.parse("m ay1 | n uw1 s | f ih1 f")
    quiet = SynthConfig(noise_sigma=0.01)
    u = synthesize(r, spk, 1, config=quiet)
    probs = bayes_enumerate(u, r, sigma=0.01).word_probs.probs
    assert max(probs) < 1e-6
    u_err = synthesize(r.replace(3, "iy1"), spk, 1, config=quiet)
    probs = bayes_enumerate(u_err, r, sigma=0.01).word_probs.probs
    assert probs[1] > 1 - 1e-6 and probs[0] < 1e-6 and probs[2] < 1e-6


def test_bayes_monte_carlo_mode_for_long_utterances():
    spk = random_profile(6, 0.5, np.random.default_rng(6))
    r = PhonemeSeq.parse("m | n | s | f")
    u = synthesize(r.replace(1, "d"), spk, 2, config=SynthConfig(noise_sigma=2.0))
    res = bayes_enumerate(u, r, BayesPrior(0.3), p_sub=0.3, sigma=2.0, n_samples=20000, seed=1)
    assert res.mode == "monte-carlo" and res.joint is None and res.word_probs.stderr is not None
    # exact reference from the factorised word likelihoods (2^4 hypotheses)
    import itertools
    wl = word_log_likelihoods(position_loglik(u, 2.0), r, 0.3)
    hyps = list(itertools.product((0, 1), repeat=4))
    logp = np.array([sum(np.log(0.3 if e else 0.7) + wl[w, e] for w, e in enumerate(h)) for h in hyps])
    post = np.exp(logp - np.logaddexp.reduce(logp))
    exact = [sum(p for h, p in zip(hyps, post) if h[w]) for w in range(4)]
    for m, se, x in zip(res.word_probs.probs, res.word_probs.stderr, exact):
        assert abs(m - x) <= 5 * se + 1e-3


def test_bayes_input_validation():
    with pytest.raises(ValueError):
        BayesPrior(0.0)
    r = PhonemeSeq.parse("m ay1")
    u = synthesize(r, random_profile(1, 0.5, np.random.default_rng(1)), 0)
    with pytest.raises(ValueError):
        bayes_enumerate(u, PhonemeSeq.parse("m ay1 n"))
