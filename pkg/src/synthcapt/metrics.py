"""Detection metrics: ROC AUC, precision at a target recall with bootstrap CIs, PR curves, severity buckets."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np


class UndefinedMetric(ValueError):
    """The metric needs both classes (or a reachable operating point)."""


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(int).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if y.sum() == 0 or y.sum() == len(y):
        raise UndefinedMetric("both classes are needed")
    return s, y


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds) over all distinct thresholds, from (0, 0) to (1, 1)."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]  # last index of each distinct score
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (len(y) - y.sum())]
    return fpr, tpr, np.r_[np.inf, s[last]]


def auc(scores, labels) -> float:
    """ROC AUC by the trapezoidal rule over all distinct thresholds."""
    fpr, tpr, _ = roc_points(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


class OperatingPoint(NamedTuple):
    precision: float
    threshold: float
    recall: float
    precision_ci: tuple[float, float] | None = None
    recall_ci: tuple[float, float] | None = None


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw (precision, recall, threshold) operating points, highest threshold first.

    A word is flagged when its score is >= threshold.
    """
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[last]
    flagged = last + 1
    return tp / flagged, tp / y.sum(), s[last]


def _operating_point(s: np.ndarray, y: np.ndarray, target: float) -> tuple[float, float, float]:
    prec, rec, thr = pr_curve(s, y)
    ok = np.flatnonzero(rec >= target - 1e-12)
    if len(ok) == 0:
        raise UndefinedMetric(f"target recall {target} unreachable (max {rec.max():.4f})")
    k = ok[0]  # thresholds are sorted descending, so the first hit is the highest threshold
    return float(prec[k]), float(thr[k]), float(rec[k])


def precision_at_recall(scores, labels, target_recall: float, groups: Sequence | None = None,
                        n_boot: int = 1000, seed: int = 0, alpha: float = 0.05) -> OperatingPoint:
    """Precision at the highest threshold whose recall reaches ``target_recall``.

    With ``groups`` (one utterance id per word) a percentile bootstrap over
    utterances gives 95% intervals for precision and recall at the chosen
    threshold.
    """
    if not 0.0 < target_recall <= 1.0:
        raise ValueError("target recall must lie in (0, 1]")
    s, y = _check(scores, labels)
    precision, threshold, recall = _operating_point(s, y, target_recall)
    if groups is None or n_boot == 0:
        return OperatingPoint(precision, threshold, recall)
    groups = np.asarray(groups)
    uniq, inv = np.unique(groups, return_inverse=True)
    rng = np.random.default_rng(seed)
    flagged = (s >= threshold).astype(float)
    tp_g = np.bincount(inv, weights=flagged * y, minlength=len(uniq))
    fl_g = np.bincount(inv, weights=flagged, minlength=len(uniq))
    pos_g = np.bincount(inv, weights=y, minlength=len(uniq))
    draws = rng.integers(0, len(uniq), size=(n_boot, len(uniq)))
    counts = np.stack([np.bincount(d, minlength=len(uniq)) for d in draws])
    tp, fl, pos = counts @ tp_g, counts @ fl_g, counts @ pos_g
    with np.errstate(invalid="ignore", divide="ignore"):
        p_boot = np.where(fl > 0, tp / fl, np.nan)
        r_boot = np.where(pos > 0, tp / pos, np.nan)
    q = [100 * alpha / 2, 100 * (1 - alpha / 2)]
    p_ci = tuple(float(x) for x in np.nanpercentile(p_boot, q))
    r_ci = tuple(float(x) for x in np.nanpercentile(r_boot, q))
    # percentile intervals of a skewed statistic can miss the point estimate by a hair
    p_ci = (min(p_ci[0], precision), max(p_ci[1], precision))
    r_ci = (min(r_ci[0], recall), max(r_ci[1], recall))
    return OperatingPoint(precision, threshold, recall, p_ci, r_ci)


SEVERITY_BUCKETS = ("1", "2", "3", ">=4")


def severity_bucket(distance: int) -> str | None:
    if distance <= 0:
        return None
    return SEVERITY_BUCKETS[min(distance, 4) - 1]


def severity_report(scores, labels, distances) -> dict[str, float | None]:
    """AUC of each distance bucket's positives against all negatives; absent buckets are None."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(int)
    d = np.asarray(distances).astype(int)
    if np.any((y == 1) & (d < 1)):
        raise ValueError("every positive needs a phoneme distance >= 1")
    neg = y == 0
    if not neg.any():
        raise UndefinedMetric("no negatives")
    out: dict[str, float | None] = {}
    for b, name in enumerate(SEVERITY_BUCKETS, 1):
        pos = (y == 1) & ((d == b) if b < 4 else (d >= 4))
        if not pos.any():
            out[name] = None
            continue
        keep = pos | neg
        out[name] = auc(s[keep], y[keep])
    return out


__all__ = ["auc", "roc_points", "pr_curve", "precision_at_recall", "OperatingPoint", "severity_report",
           "severity_bucket", "SEVERITY_BUCKETS", "UndefinedMetric"]
