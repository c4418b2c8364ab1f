"""Interaction logs, item feature tables, and train/validation/test splits.

File formats are UTF-8 TSV throughout: interactions are
``user \t item \t rating [\t timestamp]`` rows, features are
``item \t f1 \t ... \t fD`` rows, splits are ``user \t item`` rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import substream


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class InteractionRecord:
    user_id: str
    item_id: str
    rating: float
    timestamp: int | None = None


class InteractionTable:
    """Implicit-feedback table with dense user/item indices.

    ``positives[u]`` is the sorted array of item indices the user rated
    at or above the threshold; ``negatives_observed[u]`` holds the items
    the user explicitly rated below it. Immutable after construction.
    """

    def __init__(self, user_ids, item_ids, positives, negatives_observed=None):
        if not user_ids or not item_ids:
            raise DataError("interaction table must contain at least one user and item")
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.user_index = {uid: i for i, uid in enumerate(self.user_ids)}
        self.item_index = {iid: i for i, iid in enumerate(self.item_ids)}
        self.positives = [np.array(sorted(p), dtype=np.int64) for p in positives]
        self.positive_sets = [frozenset(int(i) for i in p) for p in self.positives]
        if negatives_observed is None:
            negatives_observed = [frozenset() for _ in self.user_ids]
        self.negatives_observed = [frozenset(n) for n in negatives_observed]
        n_items = len(self.item_ids)
        for u, items in enumerate(self.positives):
            if items.size and (items[0] < 0 or items[-1] >= n_items):
                raise DataError(f"user {u} has out-of-range item index")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def positive_pairs(self) -> np.ndarray:
        """All (user, item) positive pairs as an (N, 2) int array."""
        chunks = [np.stack([np.full(p.size, u, dtype=np.int64), p], axis=1)
                  for u, p in enumerate(self.positives) if p.size]
        if not chunks:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(chunks, axis=0)

    def item_popularity(self) -> np.ndarray:
        """Per-item count of positive interactions."""
        counts = np.zeros(self.n_items, dtype=np.int64)
        for p in self.positives:
            counts[p] += 1
        return counts

    def restricted_to(self, pairs) -> "InteractionTable":
        """Same id maps, positives limited to the given (user, item) pairs."""
        per_user = [[] for _ in range(self.n_users)]
        for u, v in pairs:
            if v not in self.positive_sets[u]:
                raise DataError(f"pair ({u}, {v}) is not a positive interaction")
            per_user[int(u)].append(int(v))
        return InteractionTable(self.user_ids, self.item_ids, per_user,
                                self.negatives_observed)


@dataclass
class ItemFeatureTable:
    """One fixed feature vector per item index; row i belongs to item i."""

    dim: int
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise DataError("feature matrix shape does not match dim")
        if not np.all(np.isfinite(self.vectors)):
            raise DataError("feature vectors must be finite")


@dataclass
class SplitResult:
    """Disjoint positive-pair lists. Users that end up with no training
    positives have their validation/test pairs moved to the dropped
    buckets, so train+validation+test+dropped always partitions the input.
    """

    train: list
    validation: list
    test: list
    dropped_validation: list = field(default_factory=list)
    dropped_test: list = field(default_factory=list)

    def all_pairs(self):
        return (self.train + self.validation + self.test
                + self.dropped_validation + self.dropped_test)


def load_interactions(path, threshold: float) -> InteractionTable:
    """Parse a rating TSV; rating >= threshold marks a positive.

    Indices follow first appearance order. A repeated (user, item) pair
    keeps the label of its last occurrence.
    """
    user_ids, item_ids = [], []
    user_index, item_index = {}, {}
    labels = {}
    n_lines = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            n_lines += 1
            cols = line.split("\t")
            if len(cols) not in (3, 4):
                raise DataError(f"{path}:{lineno}: expected 3 or 4 columns, got {len(cols)}")
            uid, iid, rating_s = cols[0], cols[1], cols[2]
            if not uid or not iid:
                raise DataError(f"{path}:{lineno}: empty user or item id")
            try:
                rating = float(rating_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad rating {rating_s!r}") from None
            if not np.isfinite(rating):
                raise DataError(f"{path}:{lineno}: non-finite rating")
            if len(cols) == 4:
                try:
                    int(cols[3])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad timestamp {cols[3]!r}") from None
            if uid not in user_index:
                user_index[uid] = len(user_ids)
                user_ids.append(uid)
            if iid not in item_index:
                item_index[iid] = len(item_ids)
                item_ids.append(iid)
            labels[(user_index[uid], item_index[iid])] = rating >= threshold
    if n_lines == 0:
        raise DataError(f"{path}: empty interaction file")
    positives = [[] for _ in user_ids]
    negatives = [set() for _ in user_ids]
    for (u, v), positive in labels.items():
        if positive:
            positives[u].append(v)
        else:
            negatives[u].add(v)
    return InteractionTable(user_ids, item_ids, positives, negatives)


def load_item_features(path, table: InteractionTable) -> ItemFeatureTable:
    """Parse a feature TSV; every item in the table must appear once."""
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise DataError(f"{path}:{lineno}: expected an item id and at least one value")
            if dim is None:
                dim = len(cols) - 1
            elif len(cols) - 1 != dim:
                raise DataError(
                    f"{path}:{lineno}: inconsistent dimensionality "
                    f"({len(cols) - 1} values, expected {dim})")
            iid = cols[0]
            idx = table.item_index.get(iid)
            if idx is None:
                continue
            if idx in vectors:
                raise DataError(f"{path}:{lineno}: duplicate feature row for item {iid!r}")
            try:
                vectors[idx] = [float(c) for c in cols[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if dim is None:
        raise DataError(f"{path}: empty feature file")
    missing = [iid for iid, idx in table.item_index.items() if idx not in vectors]
    if missing:
        raise DataError(f"{path}: missing feature vector for item {missing[0]!r}")
    mat = np.zeros((table.n_items, dim), dtype=np.float64)
    for idx, vec in vectors.items():
        mat[idx] = vec
    return ItemFeatureTable(dim=dim, vectors=mat)


def _finish_split(pairs, bucket) -> SplitResult:
    """Apply the drop rule: users without a train pair lose val/test pairs."""
    trained_users = {int(u) for (u, v), b in zip(pairs, bucket) if b == 0}
    train, validation, test, dropped_val, dropped_test = [], [], [], [], []
    for (u, v), b in zip(pairs, bucket):
        pair = (int(u), int(v))
        if b == 0:
            train.append(pair)
        elif b == 1:
            (validation if pair[0] in trained_users else dropped_val).append(pair)
        else:
            (test if pair[0] in trained_users else dropped_test).append(pair)
    return SplitResult(train, validation, test, dropped_val, dropped_test)


def rand_split(table: InteractionTable, fractions=(0.7, 0.1, 0.2), seed: int = 0) -> SplitResult:
    """Assign each positive pair independently with the given probabilities."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    pairs = table.positive_pairs()
    rng = substream(seed, "split")
    draws = rng.random(len(pairs))
    bucket = np.full(len(pairs), 2, dtype=np.int64)
    bucket[draws < fractions[0] + fractions[1]] = 1
    bucket[draws < fractions[0]] = 0
    return _finish_split(pairs, bucket)


def skew_inclusion_probabilities(table: InteractionTable,
                                 target_test_fraction: float | None = None,
                                 cap: float = 0.9):
    """Per-item test-inclusion probability min(alpha * c_min / c_v, cap).

    alpha is 1 unless a target test fraction is requested, in which case it
    is rescaled (by bisection) so the expected test count hits the target.
    Returns (probabilities, alpha); items with no positives get probability 0.
    """
    counts = table.item_popularity()
    if counts.sum() == 0:
        raise DataError("no positive interactions to split")
    nonzero = counts[counts > 0]
    c_min = float(nonzero.min())
    ratio = np.zeros(len(counts), dtype=np.float64)
    ratio[counts > 0] = c_min / counts[counts > 0]
    pairs = table.positive_pairs()
    pair_ratio = ratio[pairs[:, 1]]

    if target_test_fraction is None:
        alpha = 1.0
    else:
        if not 0.0 < target_test_fraction <= 1.0:
            raise ValueError("target test fraction must be in (0, 1]")
        total = len(pairs)
        target = target_test_fraction * total

        def expected(a):
            return float(np.minimum(a * pair_ratio, cap).sum())

        if target > expected(np.inf) + 1e-9:
            raise DataError(
                f"unreachable target test fraction {target_test_fraction}: "
                f"the cap {cap} limits the expected fraction to {expected(np.inf) / total:.4f}")
        lo, hi = 0.0, 1.0
        while expected(hi) < target and hi < 1e12:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if expected(mid) < target:
                lo = mid
            else:
                hi = mid
        alpha = 0.5 * (lo + hi)
    return np.minimum(alpha * ratio, cap), alpha


def skew_split(table: InteractionTable, target_test_fraction: float | None = None,
               cap: float = 0.9, seed: int = 0) -> SplitResult:
    """Popularity-skewed split: rare items are over-sampled into the test set.

    A pair of item v enters the test set with probability
    min(alpha * c_min / c_v, cap) where c_v is the item's positive count;
    the remainder splits 7:1 between train and validation.
    """
    if not 0.0 < cap <= 1.0:
        raise ValueError("cap must be in (0, 1]")
    probs, _ = skew_inclusion_probabilities(table, target_test_fraction, cap)
    pairs = table.positive_pairs()
    rng = substream(seed, "split")
    draws = rng.random(len(pairs))
    in_test = draws < probs[pairs[:, 1]]
    val_draws = rng.random(len(pairs))
    bucket = np.where(in_test, 2, np.where(val_draws < 1.0 / 8.0, 1, 0))
    return _finish_split(pairs, bucket)


def write_split(split: SplitResult, table: InteractionTable, train_path, validation_path,
                test_path) -> None:
    """Emit the three split TSVs using external ids."""
    for path, pairs in ((train_path, split.train), (validation_path, split.validation),
                        (test_path, split.test)):
        with open(path, "w", encoding="utf-8") as fh:
            for u, v in pairs:
                fh.write(f"{table.user_ids[u]}\t{table.item_ids[v]}\n")


def read_split(table: InteractionTable, train_path, validation_path, test_path) -> SplitResult:
    """Load split TSVs back, mapping external ids through the table."""

    def read_pairs(path):
        out = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 2:
                    raise DataError(f"{path}:{lineno}: expected 2 columns")
                try:
                    out.append((table.user_index[cols[0]], table.item_index[cols[1]]))
                except KeyError as exc:
                    raise DataError(f"{path}:{lineno}: unknown id {exc.args[0]!r}") from None
        return out

    return SplitResult(read_pairs(train_path), read_pairs(validation_path),
                       read_pairs(test_path))
