"""Regenerate the frozen toy-domain assets (lexicon and phoneme prototypes).

Run once; the outputs are committed under src/synthcapt/assets/.  Changing
anything here requires bumping PROTOTYPE_VERSION in speech.py.
"""

import json
from pathlib import Path

import numpy as np

from synthcapt.phonemes import CONSONANTS, INVENTORY, VOWEL_BASES, Lexicon, save_inventory

ASSETS = Path(__file__).resolve().parents[1] / "src" / "synthcapt" / "assets"
N_BANDS = 8


def make_prototypes(seed=20221):
    rng = np.random.default_rng(seed)
    bases = list(CONSONANTS) + list(VOWEL_BASES)
    # pick the most mutually distant of many random draws, then fix the scale
    best, best_gap = None, -1.0
    for _ in range(200):
        m = rng.normal(size=(len(bases), N_BANDS))
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        m *= np.sqrt(N_BANDS)  # unit RMS per band
        d = np.linalg.norm(m[:, None] - m[None], axis=-1)
        gap = d[np.triu_indices(len(bases), 1)].min()
        if gap > best_gap:
            best, best_gap = m, gap
    return {"version": 1, "seed": seed, "n_bands": N_BANDS,
            "bands": {b: [round(float(x), 6) for x in row] for b, row in zip(bases, best)}}


def make_lexicon(seed=7):
    rng = np.random.default_rng(seed)
    entries = {
        "enough": [("ih0", "n", "ah1", "f"), ("ax0", "n", "ah1", "f")],
        "remind": [("r", "iy0", "m", "ay1", "n", "d")],
    }
    n_syll_plan = [1] * 4 + [2] * 20 + [3] * 10
    while len(entries) < 36:
        n_syll = n_syll_plan[len(entries) - 2]
        stressed = int(rng.integers(n_syll))
        phones = []
        for k in range(n_syll):
            if k > 0 or rng.random() < 0.7:
                phones.append(str(rng.choice(CONSONANTS)))
            v = str(rng.choice(VOWEL_BASES))
            phones.append(f"{v}{1 if k == stressed else 0}")
            if rng.random() < 0.4:
                phones.append(str(rng.choice(CONSONANTS)))
        if len(phones) < 3 or any(a == b for a, b in zip(phones, phones[1:])):
            continue
        name = "".join(INVENTORY.base(p)[0] for p in phones)
        if name in entries:
            continue
        entries[name] = [tuple(phones)]
    # native variants: reduce an unstressed vowel to schwa, or swap ih/ax
    words = [w for w in entries if w not in ("enough", "remind")]
    for w in rng.choice(words, size=10, replace=False):
        canon = entries[w][0]
        cand = [k for k, p in enumerate(canon) if INVENTORY.is_vowel(p) and p.endswith("0")]
        if not cand:
            cand = [k for k, p in enumerate(canon) if not INVENTORY.is_vowel(p)]
            k = int(rng.choice(cand))
            alt = str(rng.choice([c for c in CONSONANTS if c != canon[k]]))
        else:
            k = int(rng.choice(cand))
            alt = "ih0" if canon[k] == "ax0" else "ax0"
        var = list(canon)
        var[k] = alt
        if any(a == b for a, b in zip(var, var[1:])):
            continue
        entries[w].append(tuple(var))
    return Lexicon(entries)


if __name__ == "__main__":
    ASSETS.mkdir(parents=True, exist_ok=True)
    (ASSETS / "prototypes_v1.json").write_text(json.dumps(make_prototypes(), indent=1) + "\n")
    make_lexicon().save(ASSETS / "lexicon.tsv")
    save_inventory(INVENTORY, ASSETS / "inventory.tsv")
