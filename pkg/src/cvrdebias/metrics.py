"""Ranking evaluation on the MAR test panel.

Each user's test items are ranked by predicted conversion rate (ties broken
by ascending item index) and scored with unnormalized DCG@K and two recall
flavors: ``normalized`` divides hits@K by the user's positive count,
``hit-count`` reports raw hits@K (its per-user average can exceed 1).
Scores are averaged uniformly over users.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .datasets import ConversionDataset
from .errors import ConfigError
from .models import FMParams

logger = logging.getLogger(__name__)


def dcg_at_k(relevance, k) -> float:
    """Sum of rel_j / log2(j + 1) over the first k ranks, binary relevance."""
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    rel = np.asarray(relevance, dtype=np.float64)
    if rel.size == 0:
        logger.warning("DCG of an empty ranking is 0")
        return 0.0
    top = rel[:k]
    return float(np.sum(top / np.log2(np.arange(2, top.size + 2))))


def recall_at_k(relevance, total_positives, k, mode="normalized") -> float:
    """Hits in the top k, normalized by the positive count or raw."""
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    hits = float(np.sum(np.asarray(relevance, dtype=np.float64)[:k]))
    if mode == "hit-count":
        return hits
    if mode == "normalized":
        if total_positives < 1:
            raise ConfigError("normalized recall needs at least one positive")
        return hits / total_positives
    raise ConfigError(f"unknown recall mode {mode!r}")


def rank_relevance(scores, items, labels):
    """Relevance labels ordered by score descending, item index ascending."""
    order = np.lexsort((items, -np.asarray(scores, dtype=np.float64)))
    return np.asarray(labels, dtype=np.float64)[order]


@dataclass
class MetricRow:
    k: int
    dcg: float
    recall_normalized: float
    recall_hitcount: float
    n_users: int


def evaluate(params: FMParams, test: ConversionDataset, ks) -> list[MetricRow]:
    """Per-user ranking metrics averaged uniformly over test users.

    ``test`` must already be filtered to users with at least one positive
    (see datasets.filter_test_users).
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ConfigError("need at least one K >= 1")
    order = np.argsort(test.users, kind="stable")
    users = test.users[order]
    items = test.items[order]
    labels = test.labels[order].astype(np.float64)
    scores = params.predict(users, items)
    boundaries = np.flatnonzero(np.diff(users)) + 1
    per_user_items = np.split(items, boundaries)
    per_user_labels = np.split(labels, boundaries)
    per_user_scores = np.split(scores, boundaries)
    sums = {k: np.zeros(3) for k in ks}
    n_users = len(per_user_items)
    for ui, ul, us in zip(per_user_items, per_user_labels, per_user_scores):
        rel = rank_relevance(us, ui, ul)
        positives = float(ul.sum())
        for k in ks:
            sums[k] += (dcg_at_k(rel, k),
                        recall_at_k(rel, positives, k, "normalized"),
                        recall_at_k(rel, positives, k, "hit-count"))
    return [MetricRow(k, *(sums[k] / n_users), n_users) for k in ks]
