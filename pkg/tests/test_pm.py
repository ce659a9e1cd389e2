import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import synthcapt.pm as pm_mod
from synthcapt.injector import TrainingExample
from synthcapt.nn_utils import TrainingError
from synthcapt.phonemes import INVENTORY, ErrorLabels, PhonemeSeq
from synthcapt.pm import PMConfig, PMModel, PMScore, build_pm_corpus, score, token_words, train_pm
from synthcapt.recognizer import PhonemePosteriorgram, RecognitionResult, greedy_decode
from synthcapt.speech import NEUTRAL_SPEAKER, synthesize
from synthcapt.world import default_lexicon

from conftest import SYMBOLS
from oracles.pm_marginal import exhaustive_pi

UNTRAINED = PMModel.create(PMConfig(emb=8, hidden=16, seed=1))
C = INVENTORY.n_classes


def _result(probs) -> RecognitionResult:
    return greedy_decode(PhonemePosteriorgram(probs))


@st.composite
def sparse_posteriorgrams(draw, max_t=4, max_support=2):
    """T x C posteriorgram with 1-``max_support`` non-zero entries per frame."""
    t = draw(st.integers(1, max_t))
    probs = np.zeros((t, C))
    for row in probs:
        ks = draw(st.lists(st.integers(0, C - 1), min_size=1, max_size=max_support, unique=True))
        w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(ks), max_size=len(ks))))
        row[ks] = w / w.sum()
    return probs


@st.composite
def short_canonicals(draw):
    words = draw(st.lists(st.lists(st.sampled_from(SYMBOLS), min_size=1, max_size=3), min_size=1, max_size=2))
    r = PhonemeSeq.from_words(words)
    return r if len(r) <= 6 else PhonemeSeq.single(r.phonemes[:6])


def _identity_sentences(n, seed):
    lex = default_lexicon()
    rng = np.random.default_rng(seed)
    plain = [w for w in lex.words if len(lex[w]) == 1]
    return [lex.sentence([plain[i] for i in rng.integers(len(plain), size=2)]) for _ in range(n)]


@pytest.fixture(scope="module")
def identity_pm():
    pairs = [(r, r.phonemes) for r in _identity_sentences(300, 0)]
    return train_pm(pairs, PMConfig(epochs=30, lr=3e-3)), pairs


@pytest.fixture(scope="module")
def variant_pm():
    lex = default_lexicon()
    rng = np.random.default_rng(1)
    pairs = [(r, r.phonemes) for r in _identity_sentences(200, 2)]
    ref = lex.sentence(["enough"])
    for _ in range(100):
        pairs.append((ref, lex["enough"][int(rng.integers(2))]))
    return train_pm(pairs, PMConfig(epochs=15))


# --- exhaustive-marginal oracle ---------------------------------------------------------

@given(sparse_posteriorgrams(), short_canonicals())
def test_exact_score_is_true_marginal(probs, r):
    res = _result(probs)
    oracle = exhaustive_pi(UNTRAINED, probs, r.phonemes, INVENTORY)
    assert abs(score(UNTRAINED, res, r, k=None, exact=True).pi - oracle) < 1e-9


@given(sparse_posteriorgrams(max_support=2), short_canonicals())
def test_full_k_topk_equals_exhaustive(probs, r):
    # with at most two candidates per frame the top-2 expansion reaches every labeling
    res = _result(probs)
    oracle = exhaustive_pi(UNTRAINED, probs, r.phonemes, INVENTORY)
    assert abs(score(UNTRAINED, res, r, k=None).pi - oracle) < 1e-9


@given(sparse_posteriorgrams(max_support=3), short_canonicals(), st.integers(1, 6))
def test_score_monotone_in_k(probs, r, k):
    res = _result(probs)
    assert score(UNTRAINED, res, r, k=k).pi <= score(UNTRAINED, res, r, k=k + 1).pi + 1e-15


@given(sparse_posteriorgrams(max_support=3), short_canonicals())
def test_score_invariants(probs, r):
    s = score(UNTRAINED, _result(probs), r, k=4)
    assert 0 < s.pi <= 1 and np.isfinite(s.log_pi)
    assert len(s.per_word_pi) == r.n_words and all(0 <= p <= 1 for p in s.per_word_pi)


def test_deterministic_posteriorgram_gives_sequence_prob():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    probs = np.zeros((5, C))
    for t, sym in enumerate(["m", "ay1", "n", "uw1", "s"]):
        probs[t, INVENTORY.id(sym)] = 1.0
    s = score(UNTRAINED, _result(probs), r)
    assert abs(s.pi - UNTRAINED.sequence_prob(r.phonemes, r.phonemes)) < 1e-12


def test_score_rejects_bad_k():
    with pytest.raises(ValueError):
        score(UNTRAINED, _result(np.full((2, C), 1 / C)), PhonemeSeq.single(["m"]), k=0)
    with pytest.raises(ValueError):
        PMScore(0.0, (0.0,), 0.0)


@given(short_canonicals(), st.integers(0, 5))
def test_decoder_row_stochastic(r, n_prefix):
    prefix = list(r.phonemes[:n_prefix])
    p = UNTRAINED.next_distribution(r.phonemes, prefix)
    assert p.shape == (len(INVENTORY) + 1,) and abs(p.sum() - 1) < 1e-6


def test_untrained_near_uniform():
    p = UNTRAINED.next_distribution(("m", "ay1"), ())
    entropy = -(p * np.log(p)).sum()
    assert entropy >= 0.9 * np.log(len(p))


def test_token_words():
    r = PhonemeSeq.parse("m ay1 | n uw1 s")
    assert token_words(r, ["m", "ay1", "n", "uw1", "s"]) == [0, 0, 1, 1, 1, 1]
    assert token_words(r, ["m", "ay1", "d", "n", "uw1", "s"]) == [0, 0, 0, 1, 1, 1, 1]
    assert token_words(r, []) == [1]


# --- corpus ---------------------------------------------------------------------------------

def _perfect_recognizer(monkeypatch):
    def recognize(_model, u):
        probs = np.zeros((2 * len(u.canonical), C))
        probs[1::2, INVENTORY.blank_id] = 1.0  # blanks keep repeated phonemes apart
        probs[np.arange(0, 2 * len(u.canonical), 2), INVENTORY.ids(u.canonical.phonemes)] = 1.0
        return greedy_decode(PhonemePosteriorgram(probs))

    monkeypatch.setattr(pm_mod, "recognize", recognize)


def test_build_pm_corpus_perfect_recognizer(monkeypatch):
    _perfect_recognizer(monkeypatch)
    utts = [synthesize(r, NEUTRAL_SPEAKER, k) for k, r in enumerate(_identity_sentences(7, 3))]
    pairs = build_pm_corpus(None, utts)
    assert len(pairs) == 7
    assert all(tuple(r.phonemes) == o for r, o in pairs)
    with pytest.raises(ValueError):
        build_pm_corpus(None, [])


def test_build_pm_corpus_keeps_variants(monkeypatch):
    _perfect_recognizer(monkeypatch)
    lex = default_lexicon()
    ref = lex.sentence(["enough"])
    examples = [TrainingExample(ErrorLabels.no_error(ref), synthesize(PhonemeSeq.single(v), NEUTRAL_SPEAKER, k),
                                ref, "original") for k, v in enumerate(lex["enough"])]
    targets = {o for r, o in build_pm_corpus(None, examples) if r == ref}
    assert targets == set(lex["enough"])


# --- training --------------------------------------------------------------------------------

def test_identity_pm(identity_pm):
    identity_pm, pairs = identity_pm
    assert identity_pm.loss_trace[-1] < identity_pm.loss_trace[0]
    # in-domain: every training sequence is copied with probability >= 0.9
    assert min(identity_pm.sequence_prob(r.phonemes, r.phonemes) for r, _ in pairs) >= 0.9
    held_out = _identity_sentences(40, 10)
    rng = np.random.default_rng(0)
    wins = total = 0
    for r in held_out:
        canon = identity_pm.sequence_prob(r.phonemes, r.phonemes)
        for _ in range(5):
            j = int(rng.integers(len(r)))
            sub = r.replace(j, str(rng.choice([s for s in SYMBOLS if s != r[j]])))
            wins += canon > identity_pm.sequence_prob(r.phonemes, sub.phonemes)
            total += 1
    assert wins / total >= 0.95


def test_variant_pm_prefers_lexicon_variant(variant_pm):
    lex = default_lexicon()
    ref = lex["enough"][0]
    alt = lex["enough"][1]
    p_alt = variant_pm.sequence_prob(ref, alt)
    rng = np.random.default_rng(3)
    randoms = []
    for _ in range(20):
        j = int(rng.integers(len(ref)))
        sub = list(ref)
        sub[j] = str(rng.choice([s for s in SYMBOLS if s not in (ref[j], alt[j])]))
        randoms.append(variant_pm.sequence_prob(ref, sub))
    assert p_alt > 10 * max(randoms)


def test_training_deterministic_and_checkpoint(tmp_path):
    pairs = [(r, r.phonemes) for r in _identity_sentences(20, 4)]
    a = train_pm(pairs, PMConfig(epochs=2, emb=8, hidden=16))
    b = train_pm(pairs, PMConfig(epochs=2, emb=8, hidden=16))
    assert a.loss_trace == b.loss_trace
    a.save(tmp_path / "pm")
    c = PMModel.load(tmp_path / "pm")
    r = pairs[0][0]
    assert c.sequence_prob(r.phonemes, r.phonemes) == a.sequence_prob(r.phonemes, r.phonemes)
    with pytest.raises(TrainingError):
        train_pm([], PMConfig(epochs=1))
