"""Rank-based evaluation metrics for outlier scorings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ._validation import DataError, check_labels, check_vector


@dataclass(frozen=True)
class EvalResult:
    roc_auc: float
    p_at_n: float
    n_outliers: int


def _check_scored(labels, scores):
    scores = check_vector(scores, name="scores")
    labels = check_labels(labels, scores.shape[0])
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DataError("both classes must be present")
    return labels, scores, n_pos


def roc_auc(labels, scores) -> float:
    """Probability that a random outlier outscores a random inlier.

    Equals the Mann-Whitney statistic computed exactly from rank sums:
    ties contribute 1/2. Invariant under strictly increasing transforms
    of the scores.

    Parameters
    ----------
    labels : sequence of {0, 1}
    scores : sequence of float, same length, higher = more outlying.
    """
    labels, scores, n_pos = _check_scored(labels, scores)
    n_neg = labels.size - n_pos
    ranks = rankdata(scores)  # average ranks on ties
    pos_rank_sum = ranks[labels == 1].sum()
    wins = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(wins / (n_pos * n_neg))


def precision_at_n(labels, scores) -> float:
    """Fraction of true outliers among the top-n scored points.

    n is the number of positive labels. Ties at the cutoff are broken by
    original index (lower index ranks first), which makes the result
    deterministic for any input.
    """
    labels, scores, n_pos = _check_scored(labels, scores)
    order = np.argsort(-scores, kind="stable")
    top = order[:n_pos]
    return float(labels[top].sum() / n_pos)


def spearman(a, b) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks.

    Parameters
    ----------
    a, b : sequences of float, equal length >= 3.

    Returns
    -------
    float in [-1, 1]
    """
    a = check_vector(a, name="a")
    b = check_vector(b, name="b", length=a.shape[0])
    if a.shape[0] < 3:
        raise DataError(f"spearman needs length >= 3, got {a.shape[0]}")
    ra = rankdata(a)
    rb = rankdata(b)
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        raise DataError("spearman undefined for zero-variance ranks")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    return float((ra @ rb) / np.sqrt((ra @ ra) * (rb @ rb)))


def evaluate(labels, scores) -> EvalResult:
    """Convenience bundle of both headline metrics."""
    labels_arr, _, n_pos = _check_scored(labels, scores)
    return EvalResult(
        roc_auc=roc_auc(labels, scores),
        p_at_n=precision_at_n(labels, scores),
        n_outliers=n_pos,
    )
