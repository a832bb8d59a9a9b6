"""Ranking metrics for multi-label prediction and retrieval quality.

Label-ranking average precision (LRAP) and label-ranking loss (LRL)
score a matrix of per-label confidences against binary ground truth;
the normalized average rank (NAR) scores a retrieval ranking given the
positions of the relevant items (0 = perfect, ~0.5 = random order).

Ties are handled exactly as defined: a label's rank counts every label
scored greater *or equal*, and a true/false pair with equal scores
counts as incorrectly ordered.  Library implementations differ here, so
do not swap these for a drop-in replacement without checking.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


class MetricInputError(ValueError):
    pass


def _check_pair(y, f):
    y = np.asarray(y)
    f = np.asarray(f)
    if y.ndim != 2 or f.shape != y.shape:
        raise MetricInputError(f"shape mismatch: truth {y.shape} vs scores {f.shape}")
    if not np.isin(y, (0, 1)).all():
        raise MetricInputError("ground truth entries must be binary")
    if not np.isfinite(f).all():
        raise MetricInputError("scores must be finite")
    return y.astype(bool), f.astype(np.float64)


def lrap(y, f) -> float:
    """Label ranking average precision over samples with >=1 true label.

    For each true label: the fraction of labels ranked at or above it
    (by score, ties counted) that are themselves true, averaged over the
    sample's true labels, then over samples.  Always in (0, 1].
    """
    y, f = _check_pair(y, f)
    per_sample = []
    skipped = 0
    for yi, fi in zip(y, f):
        if not yi.any():
            skipped += 1
            continue
        ge = fi[None, :] >= fi[:, None]      # ge[j, k]: label k scored >= label j
        rank = ge.sum(axis=1)
        true_at_or_above = ge[:, yi].sum(axis=1)
        per_sample.append(np.mean(true_at_or_above[yi] / rank[yi]))
    if not per_sample:
        raise MetricInputError("all-zero ground truth: no sample has a true label")
    if skipped:
        log.warning("lrap: skipped %d sample(s) without true labels", skipped)
    return float(np.mean(per_sample))


def lrl(y, f) -> float:
    """Label ranking loss: the fraction of (true, false) label pairs
    whose scores are inverted (equal counts as inverted).  In [0, 1]."""
    y, f = _check_pair(y, f)
    n_labels = y.shape[1]
    per_sample = []
    skipped = 0
    for yi, fi in zip(y, f):
        k = int(yi.sum())
        if k == 0 or k == n_labels:
            skipped += 1
            continue
        true_scores = fi[yi]
        false_scores = fi[~yi]
        inverted = (true_scores[:, None] <= false_scores[None, :]).sum()
        per_sample.append(inverted / (k * (n_labels - k)))
    if not per_sample:
        raise MetricInputError("every sample is degenerate (no true or no false labels)")
    if skipped:
        log.warning("lrl: skipped %d degenerate sample(s)", skipped)
    return float(np.mean(per_sample))


@dataclass(frozen=True)
class RankEvaluation:
    """Positions of the relevant items within a ranking of ``corpus_size``.

    Ranks are 1-based and distinct; ties upstream must already be broken
    (the search layer orders equal distances by ascending logo id).
    """

    corpus_size: int
    ranks: tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        if not ranks:
            raise MetricInputError("at least one relevant rank is required")
        if len(set(ranks)) != len(ranks):
            raise MetricInputError("ranks must be distinct")
        if min(ranks) < 1 or max(ranks) > self.corpus_size:
            raise MetricInputError(
                f"ranks must lie in [1, {self.corpus_size}], got {ranks}"
            )
        object.__setattr__(self, "ranks", ranks)

    @property
    def n_relevant(self) -> int:
        return len(self.ranks)


def nar(evaluation: RankEvaluation) -> float:
    """Normalized average rank of the relevant items.

    0 for relevant items at the very top, (N - N_rel) / N when they sit
    at the very bottom, ~0.5 under a random ordering.
    """
    n = evaluation.corpus_size
    n_rel = evaluation.n_relevant
    best_sum = n_rel * (n_rel + 1) / 2
    return float((sum(evaluation.ranks) - best_sum) / (n * n_rel))


def binary_accuracy(pred: Sequence[bool], truth: Sequence[bool]) -> float:
    """Fraction of positions where prediction equals truth."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise MetricInputError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise MetricInputError("empty prediction vector")
    return float((pred == truth).mean())


def degenerate_sample_counts(y) -> dict[str, int]:
    """How many samples each ranking metric will skip (for reports)."""
    y = np.asarray(y)
    row_true = y.sum(axis=1)
    return {
        "lrap_skipped": int((row_true == 0).sum()),
        "lrl_skipped": int(((row_true == 0) | (row_true == y.shape[1])).sum()),
    }
