"""Top-K ranking evaluation under the real-plus-N protocol.

Each evaluated user's test positives are ranked against N sampled
negatives (items the user never rated positively anywhere); nDCG@K,
Recall@K and Precision@K are averaged over users with at least one test
positive. Scores only matter through their order: ties break by ascending
item index, and any strictly monotone transform of a scorer yields the
same report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalProtocol:
    k: int = 5
    n_negatives: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_negatives < self.k:
            raise ValueError("need at least k negatives")


@dataclass
class MetricsReport:
    users: np.ndarray
    ndcg: np.ndarray
    recall: np.ndarray
    precision: np.ndarray
    k: int
    n_negatives: int
    seed: int
    shortfall_users: int = 0

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def ndcg_mean(self) -> float:
        return float(self.ndcg.mean())

    @property
    def recall_mean(self) -> float:
        return float(self.recall.mean())

    @property
    def precision_mean(self) -> float:
        return float(self.precision.mean())


def rank_candidates(scorer, u: int, test_items, excluded_items, n_items: int,
                    protocol: EvalProtocol, rng: np.random.Generator):
    """Rank the user's test positives against sampled negatives.

    ``excluded_items`` is the user's full positive set (train, validation
    and test); negatives are drawn uniformly without replacement outside
    it. Returns (ordered item indices, relevance flags, shortfall), where
    shortfall counts requested negatives that were unavailable.
    """
    test_items = np.asarray(sorted(int(v) for v in test_items), dtype=np.int64)
    excluded = set(int(v) for v in excluded_items) | set(int(v) for v in test_items)
    eligible = np.array([v for v in range(n_items) if v not in excluded], dtype=np.int64)
    take = min(protocol.n_negatives, len(eligible))
    shortfall = protocol.n_negatives - take
    negatives = rng.choice(eligible, size=take, replace=False) if take else eligible[:0]
    candidates = np.concatenate([test_items, negatives])
    scores = np.asarray(scorer(u, candidates, rng), dtype=np.float64)
    order = np.lexsort((candidates, -scores))
    ranked = candidates[order]
    flags = np.isin(ranked, test_items)
    return ranked, flags, shortfall


def ndcg_at_k(flags, k: int) -> float:
    """Binary-gain nDCG: DCG uses 1/log2(rank + 1) with rank starting at 1."""
    flags = np.asarray(flags, dtype=bool)
    n_relevant = int(flags.sum())
    if n_relevant == 0:
        raise ValueError("ndcg needs at least one relevant item")
    ranks = np.arange(1, min(k, len(flags)) + 1)
    gains = 1.0 / np.log2(ranks + 1)
    dcg = float((gains * flags[:len(ranks)]).sum())
    ideal = np.arange(1, min(k, n_relevant) + 1)
    idcg = float((1.0 / np.log2(ideal + 1)).sum())
    return dcg / idcg


def recall_precision_at_k(flags, k: int, total_relevant: int):
    """(hits@k / total relevant, hits@k / k)."""
    if total_relevant < 1:
        raise ValueError("total_relevant must be >= 1")
    flags = np.asarray(flags, dtype=bool)
    hits = int(flags[:k].sum())
    return hits / total_relevant, hits / k


def evaluate(scorer, split, table, protocol: EvalProtocol) -> MetricsReport:
    """Per-user metrics over every user with at least one test positive.

    Each user gets an independent generator seeded by (protocol seed,
    user index), so reports do not depend on evaluation order.
    """
    test_by_user = {}
    for u, v in split.test:
        test_by_user.setdefault(int(u), []).append(int(v))
    if not test_by_user:
        raise ValueError("empty test split")
    users, ndcg, recall, precision = [], [], [], []
    shortfall_users = 0
    for u in sorted(test_by_user):
        rng = np.random.default_rng([protocol.seed, u])
        _, flags, shortfall = rank_candidates(
            scorer, u, test_by_user[u], table.positive_sets[u], table.n_items,
            protocol, rng)
        if shortfall:
            shortfall_users += 1
        users.append(u)
        ndcg.append(ndcg_at_k(flags, protocol.k))
        rec, pre = recall_precision_at_k(flags, protocol.k, len(test_by_user[u]))
        recall.append(rec)
        precision.append(pre)
    return MetricsReport(
        users=np.asarray(users, dtype=np.int64),
        ndcg=np.asarray(ndcg), recall=np.asarray(recall),
        precision=np.asarray(precision),
        k=protocol.k, n_negatives=protocol.n_negatives, seed=protocol.seed,
        shortfall_users=shortfall_users)
