"""Brute-force posterior over word-error labels by enumerating every realised sequence.

Independent of the library's factorised computation: frame means come from
the synthesizer itself (noise-free re-rendering with the recorded prosody)
and every r' in V^n is enumerated explicitly.
"""

import itertools

import numpy as np

from synthcapt.phonemes import INVENTORY, PhonemeSeq
from synthcapt.speech import SynthConfig, synthesize


def brute_force_posterior(u, r, rho, p_sub, sigma):
    symbols = INVENTORY.symbols
    V, n = len(symbols), len(r)
    spans = u.prosody.spans()
    clean = SynthConfig(noise_sigma=0.0)
    # log-likelihood of each position's frames under each symbol, from noise-free renderings
    table = np.zeros((n, V))
    for k, sym in enumerate(symbols):
        seq = PhonemeSeq((sym,) * n, r.word_spans)
        means = synthesize(seq, u.speaker, 0, prosody=u.prosody, config=clean).speech
        for j, (s, e) in enumerate(spans):
            diff = u.speech[s:e] - means[s:e]
            table[j, k] = -0.5 * (diff ** 2).sum() / sigma**2 - diff.size * np.log(np.sqrt(2 * np.pi) * sigma)
    canon = [symbols.index(x) for x in r.phonemes]
    word_of = r.word_index()
    W = r.n_words
    # every r' in V^n as rows of an index grid
    grid = np.array(list(itertools.product(range(V), repeat=n)), dtype=int).reshape(-1, n)
    changed_pos = grid != np.array(canon)[None, :]
    logp_pert = np.where(changed_pos, np.log(p_sub / (V - 1)), np.log(1 - p_sub)).sum(axis=1)
    loglik = table[np.arange(n)[None, :], grid].sum(axis=1)
    word_changed = np.zeros((len(grid), W), dtype=int)
    for j in range(n):
        word_changed[:, word_of[j]] |= changed_pos[:, j]
    codes = [tuple(row) for row in word_changed]
    lik_by_e, pert_by_e = {}, {}
    for code, lp, ll in zip(codes, logp_pert, loglik):
        lik_by_e.setdefault(code, []).append(lp + ll)
        pert_by_e.setdefault(code, []).append(lp)
    joint = {}
    for e in itertools.product((0, 1), repeat=W):
        log_prior = sum(np.log(rho if x else 1 - rho) for x in e)
        # p(s | e) = sum_{r': e(r')=e} p(r'|r) p(s|r') / P(e(r') = e)
        log_s_given_e = np.logaddexp.reduce(lik_by_e[e]) - np.logaddexp.reduce(pert_by_e[e])
        joint[e] = log_prior + log_s_given_e
    z = np.logaddexp.reduce(list(joint.values()))
    joint = {e: float(np.exp(v - z)) for e, v in joint.items()}
    marg = [sum(p for e, p in joint.items() if e[w]) for w in range(W)]
    return marg, joint
