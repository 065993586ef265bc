"""Scores to numbers: AUC, windows, split aggregation, significance."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import ConfigurationError, NumericError

STABLE = 0
UNSTABLE = 1


@dataclass(frozen=True)
class ScoredSample:
    score: float
    true_class: int  # 0 stable, 1 unstable
    day_label: int
    split_id: int = 0

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise NumericError(f"non-finite score for day {self.day_label}")
        if self.true_class not in (STABLE, UNSTABLE):
            raise ConfigurationError(f"true_class must be 0 or 1, got {self.true_class}")


def scored_samples(scores, classes, days, split_id=0) -> list[ScoredSample]:
    return [ScoredSample(float(s), int(c), int(d), split_id) for s, c, d in zip(scores, classes, days)]


def auc_scores(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_unstable > score_stable) with ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if not np.all(np.isfinite(scores)):
        raise NumericError("AUC needs finite scores")
    pos = labels == UNSTABLE
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ConfigurationError("AUC needs at least one stable and one unstable sample")
    ranks = stats.rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc(samples) -> float:
    return auc_scores([s.score for s in samples], [s.true_class for s in samples])


def windowed_auc(samples, windows) -> dict:
    """AUC per inclusive day window over all stable samples plus the window's unstable ones.

    Windows without unstable samples map to None rather than a number.
    """
    stable = [s for s in samples if s.true_class == STABLE]
    out = {}
    for lo, hi in windows:
        inside = [s for s in samples if s.true_class == UNSTABLE and lo <= s.day_label <= hi]
        out[(int(lo), int(hi))] = auc(stable + inside) if inside and stable else None
    return out


def window_label(window) -> str:
    lo, hi = window
    return f"D{lo:+d}..D{hi:+d}"


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (ddof=1) over per-split values."""
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def welch_test(a, b) -> float:
    """Two-sided Welch t-test p-value; NaN when either side is constant and equal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        return math.nan
    with warnings.catch_warnings():
        # near-identical split AUCs trip scipy's precision warning; the p-value is still usable
        warnings.simplefilter("ignore", RuntimeWarning)
        p = stats.ttest_ind(a, b, equal_var=False).pvalue
    return float(p)


def best_threshold_accuracy(scores, labels) -> tuple[float, float]:
    """Highest accuracy of ``score > t -> unstable`` over all thresholds, and that ``t``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels) == UNSTABLE
    cuts = np.concatenate([[-np.inf], np.unique(scores)])
    # predicted unstable iff score > cut
    order = np.argsort(scores)
    s_sorted, l_sorted = scores[order], labels[order]
    stable_le = np.cumsum(~l_sorted)
    unstable_le = np.cumsum(l_sorted)
    idx = np.searchsorted(s_sorted, cuts, side="right")
    n_stable_le = np.where(idx > 0, stable_le[np.maximum(idx - 1, 0)], 0)
    n_unstable_le = np.where(idx > 0, unstable_le[np.maximum(idx - 1, 0)], 0)
    correct = n_stable_le + (labels.sum() - n_unstable_le)
    best = int(np.argmax(correct))
    return float(correct[best] / len(scores)), float(cuts[best])


def kendall_tau(values) -> float:
    """Kendall tau of values against their position; windows with None are skipped."""
    pts = [(i, v) for i, v in enumerate(values) if v is not None]
    if len(pts) < 2:
        return math.nan
    x, y = zip(*pts)
    return float(stats.kendalltau(x, y).statistic)


def fd_bins(values, max_bins: int = 50) -> np.ndarray:
    """Freedman-Diaconis bin edges, at most ``max_bins``; one bin when the range is degenerate."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return np.array([lo - 0.5, lo + 0.5]) if lo == 0 else np.array([lo - 0.5 * abs(lo), lo + 0.5 * abs(lo)])
    iqr = stats.iqr(v)
    width = 2.0 * iqr / len(v) ** (1 / 3) if iqr > 0 else 0.0
    n = int(math.ceil((hi - lo) / width)) if width > 0 else max_bins
    return np.linspace(lo, hi, max(1, min(n, max_bins)) + 1)
