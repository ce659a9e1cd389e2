"""Brute-force references for ranking metrics."""

import numpy as np


def pairwise_auc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie) over all positive/negative pairs."""
    s, y = np.asarray(scores, float), np.asarray(labels, int)
    pos, neg = s[y == 1], s[y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def sweep_precision_at_recall(scores, labels, target):
    """Try every distinct score as a ``>=`` threshold; keep the highest one reaching the target recall."""
    s, y = np.asarray(scores, float), np.asarray(labels, int)
    for t in sorted(set(s.tolist()), reverse=True):
        flagged = s >= t
        tp = int((flagged & (y == 1)).sum())
        rec = tp / int(y.sum())
        if rec >= target - 1e-12:
            return tp / int(flagged.sum()), t, rec
    return None
