import os

import numpy as np

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from synthcapt.phonemes import INVENTORY, PhonemeSeq
from synthcapt.speech import SynthConfig, synthesize
from synthcapt.world import random_profile

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SYMBOLS = INVENTORY.symbols
VOWELS = tuple(s for s in SYMBOLS if INVENTORY.is_vowel(s))


def symbol_lists(min_size=1, max_size=6, alphabet=SYMBOLS):
    return st.lists(st.sampled_from(alphabet), min_size=min_size, max_size=max_size)


@st.composite
def phoneme_seqs(draw, max_words=3, max_len=5):
    words = draw(st.lists(symbol_lists(1, max_len), min_size=1, max_size=max_words))
    return PhonemeSeq.from_words(words)



def random_bayes_instance(rng):
    """(utterance, canonical, rho, p_sub, sigma): at most 3 words and 4 phonemes, 0-2 substitutions spoken."""
    n_words = int(rng.integers(1, 4))
    words = [list(rng.choice(SYMBOLS, size=int(rng.integers(1, 3)))) for _ in range(n_words)]
    if sum(map(len, words)) > 4:
        words = [w[:1] for w in words]
    r = PhonemeSeq.from_words(words)
    sigma = float(rng.choice([0.5, 1.0, 2.0, 4.0]))
    spk = random_profile(int(rng.integers(1, 1000)), 0.5, rng)
    spoken = list(r.phonemes)
    for j in rng.choice(len(r), size=int(rng.integers(0, min(2, len(r)) + 1)), replace=False):
        spoken[j] = str(rng.choice([s for s in SYMBOLS if s != spoken[j]]))
    u = synthesize(PhonemeSeq(tuple(spoken), r.word_spans), spk, int(rng.integers(2**31)),
                   config=SynthConfig(noise_sigma=sigma))
    return u, r, float(rng.uniform(0.05, 0.5)), float(rng.uniform(0.05, 0.5)), sigma


# --- acceptance bookkeeping --------------------------------------------------------------------
# Acceptance tests run last, so the invariant-suite criterion can inspect every other result of
# the session.  Each criterion records one PASS/FAIL line, repeated in the terminal summary.

ACCEPTANCE_LINES: list[str] = []
SESSION = {"start": None, "outcomes": {}}


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_sessionstart(session):
    import time

    SESSION["start"] = time.monotonic()


def pytest_collection_modifyitems(session, config, items):
    items.sort(key=lambda it: it.nodeid.split("::")[0].endswith("test_acceptance.py"))


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        prev = SESSION["outcomes"].get(report.nodeid)
        if prev in (None, "passed"):
            SESSION["outcomes"][report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
