import hashlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from synthcapt.injector import (PerturbationConfig, TrainingExample, make_p2p_example, perturb, perturb_with_ops,
                                sample_utterances)
from synthcapt.phonemes import ErrorLabels, PhonemeSeq, phoneme_distance, project_errors
from synthcapt.speech import SynthConfig, synthesize
from synthcapt.world import random_profile

from conftest import SYMBOLS, phoneme_seqs

SPEAKER = random_profile(1, 0.3, np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValueError):
        PerturbationConfig(p_sub=1.2)
    with pytest.raises(ValueError):
        PerturbationConfig(p_sub=0.7, p_del=0.5)
    assert PerturbationConfig(0, 0, 0).is_zero


def test_sample_utterances():
    assert sample_utterances(["a"], 5, 0) == ["a"] * 5
    with pytest.raises(ValueError):
        sample_utterances(["a"], 0, 0)
    with pytest.raises(ValueError):
        sample_utterances([], 3, 0)
    draws = sample_utterances(list(range(10)), 10000, 7)
    freq = np.bincount(draws, minlength=10) / 10000
    assert np.all(np.abs(freq - 0.1) <= 0.01)
    assert sample_utterances(list(range(10)), 20, 7) == draws[:20]


def test_perturb_identity_and_forced_substitution():
    r = PhonemeSeq.parse("ih0 n ah1 f | m ay1")
    assert perturb(r, PerturbationConfig(0, 0, 0)) == r
    rp = perturb(r, PerturbationConfig.substitution_only(1.0))
    assert len(rp) == len(r) and all(x != y for x, y in zip(r, rp))


def test_substitution_rate_monte_carlo():
    r = PhonemeSeq.from_words([["m", "iy1", "n", "s"]] * 2500)
    rp = perturb(r, PerturbationConfig.substitution_only(0.2, seed=3))
    frac = np.mean([x != y for x, y in zip(r, rp)])
    assert abs(frac - 0.2) <= 0.01


@given(phoneme_seqs(), st.floats(0, 1), st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 2**31))
def test_perturb_ops_reproduce_output(r, p_sub, p_ins, p_del, seed):
    if p_sub + p_del > 1:
        p_del = 1 - p_sub
    cfg = PerturbationConfig(p_sub, p_ins, p_del, seed)
    rp, ops = perturb_with_ops(r, cfg)
    assert ops.apply(r.phonemes, rp.phonemes) == list(rp.phonemes)
    assert rp.n_words == r.n_words and all(e > s for _, s, e in rp.word_spans)
    assert perturb(r, cfg) == rp  # deterministic given the seed


@given(phoneme_seqs(), st.floats(0, 1), st.integers(0, 2**31))
def test_substitution_only_distance(r, p, seed):
    rp, ops = perturb_with_ops(r, PerturbationConfig.substitution_only(p, seed))
    n_sub = sum(o.op == "sub" for o in ops.ops)
    assert sum(a != b for a, b in zip(r.phonemes, rp.phonemes)) == n_sub
    assert sum(project_errors(r, rp).phoneme_errors) == n_sub
    # substitutions bound the edit distance; a shifted alignment can be cheaper
    d = phoneme_distance(r, rp)
    assert d <= n_sub and (d == n_sub if n_sub <= 1 else d >= 1)


def test_substitutions_can_exceed_edit_distance():
    r = ["r", "r", "iy1", "r", "ay2"]
    rp = ["iy2", "iy1", "ah0", "ay2", "iy0"]  # five substitutions
    assert phoneme_distance(r, rp) == 4  # delete r, sub, match iy1, sub, match ay2, insert iy0


def _utt(r, seed=0):
    return synthesize(r, SPEAKER, seed)


def test_p2p_example_keeps_speech():
    r = PhonemeSeq.parse("ih0 n ah1 f")
    u = _utt(r)
    ex = make_p2p_example(u, r, PerturbationConfig(0, 0, 0))
    assert ex.labels.word_errors == (0,) and ex.canonical == r and ex.provenance == "p2p"
    ex = make_p2p_example(u, r, PerturbationConfig.substitution_only(1.0))
    assert ex.labels.word_errors == (1,)
    assert ex.speech is u and np.array_equal(ex.speech.speech, u.speech)
    r3 = PhonemeSeq.parse("m ay1 | n uw1 s | f ih1 f")
    ex = make_p2p_example(_utt(r3), r3, PerturbationConfig.substitution_only(1.0))
    assert ex.labels.word_errors == (1, 1, 1)


@given(phoneme_seqs(max_words=3, max_len=4), st.integers(0, 2**31))
def test_p2p_labels_match_projection(r, seed):
    u = _utt(r)
    before = u.speech.copy()
    ex = make_p2p_example(u, r, PerturbationConfig(0.3, 0.1, 0.1), np.random.default_rng(seed))
    assert np.array_equal(ex.speech.speech, before)
    assert len(ex.labels.word_errors) == ex.canonical.n_words
    rp, ops = perturb_with_ops(r, PerturbationConfig(0.3, 0.1, 0.1), np.random.default_rng(seed))
    assert rp == ex.canonical
    # a word is labelled iff the edit script touched it (insertions belong to the word they follow)
    edited, word = set(), 0
    for op in ops.ops:
        if op.i is not None:
            word = r.word_of(op.i)
        if op.op != "match":
            edited.add(word)
    assert ex.labels.word_errors == tuple(int(w in edited) for w in range(r.n_words))
    for w, (a, b) in enumerate(zip(r.words(), ex.canonical.words())):
        if a != b:
            assert ex.labels.word_errors[w] == 1


@given(phoneme_seqs(max_words=3, max_len=4), st.integers(0, 2**31))
def test_p2p_substitution_labels_equal_projection(r, seed):
    ex = make_p2p_example(_utt(r), r, PerturbationConfig.substitution_only(0.3), np.random.default_rng(seed))
    assert ex.labels == project_errors(r, ex.canonical.phonemes)


def test_expected_word_error_fraction():
    r = PhonemeSeq.from_words([["m", "iy1", "n"]] * 3000)
    p = 0.1
    rp = perturb(r, PerturbationConfig.substitution_only(p, seed=11))
    frac = np.mean(project_errors(r, rp).word_errors)
    expected = 1 - (1 - p) ** 3
    assert abs(frac - expected) < 4 * np.sqrt(expected * (1 - expected) / 3000)


def test_generation_reproducible_hash():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    u = _utt(r)

    def digest(seed):
        rng = np.random.default_rng(seed)
        exs = [make_p2p_example(u, r, PerturbationConfig(), rng) for _ in range(20)]
        return hashlib.sha256(repr([(str(e.canonical), e.labels) for e in exs]).encode()).hexdigest()

    assert digest(5) == digest(5)
    assert digest(5) != digest(6)


def test_training_example_validation():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    with pytest.raises(ValueError):
        TrainingExample(ErrorLabels.no_error(r), None, r, "bogus")
    with pytest.raises(ValueError):
        TrainingExample(ErrorLabels((0, 0), (0,)), None, r, "p2p")
