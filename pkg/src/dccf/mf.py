"""Pairwise-trained matrix factorization with user/item/global offsets.

Used both as the exposure model's score function and as the baseline
recommender. Scores are p_u . q_v + b_u + b_v + b_g; training minimizes
-ln sigmoid(score(u, pos) - score(u, neg)) with one sampled negative per
positive per epoch, plus an L2 penalty on all parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import AdamState, DivergenceError, adam_step, sigmoid, softplus


@dataclass(frozen=True)
class BprConfig:
    dim: int = 32
    learning_rate: float = 0.01
    l2: float = 1e-4
    epochs: int = 20
    batch_size: int = 128
    init_scale: float = 0.1


class MfModel:
    def __init__(self, p, q, b_user, b_item, b_global):
        self.p = np.asarray(p, dtype=np.float64)
        self.q = np.asarray(q, dtype=np.float64)
        self.b_user = np.asarray(b_user, dtype=np.float64)
        self.b_item = np.asarray(b_item, dtype=np.float64)
        self.b_global = np.asarray(b_global, dtype=np.float64).reshape(())

    @classmethod
    def init(cls, n_users: int, n_items: int, dim: int, rng: np.random.Generator,
             scale: float = 0.1) -> "MfModel":
        return cls(
            rng.normal(0.0, scale, size=(n_users, dim)),
            rng.normal(0.0, scale, size=(n_items, dim)),
            np.zeros(n_users),
            np.zeros(n_items),
            np.zeros(()),
        )

    @property
    def n_users(self) -> int:
        return self.p.shape[0]

    @property
    def n_items(self) -> int:
        return self.q.shape[0]

    def raw_scores(self, u: int, items) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        return self.q[items] @ self.p[u] + self.b_user[u] + self.b_item[items] + float(self.b_global)

    def params(self) -> dict:
        return {"p": self.p, "q": self.q, "b_user": self.b_user,
                "b_item": self.b_item, "b_global": self.b_global}


def sample_negatives(rng: np.random.Generator, users, positive_sets, n_items: int) -> np.ndarray:
    """One uniform non-positive item per user entry (rejection sampling)."""
    users = np.asarray(users, dtype=np.int64)
    out = rng.integers(0, n_items, size=users.size)
    for i, u in enumerate(users):
        pos = positive_sets[u]
        if len(pos) >= n_items:
            raise ValueError(f"user {u} has no negative items to sample")
        while int(out[i]) in pos:
            out[i] = rng.integers(0, n_items)
    return out


def train_bpr(n_users: int, n_items: int, train_pairs, positive_sets,
              cfg: BprConfig, rng: np.random.Generator):
    """BPR training loop; returns (model, per-epoch mean losses)."""
    pairs = np.asarray(train_pairs, dtype=np.int64)
    if pairs.size == 0:
        raise ValueError("no training pairs")
    model = MfModel.init(n_users, n_items, cfg.dim, rng, cfg.init_scale)
    params = model.params()
    adam = AdamState.for_params(params, cfg.learning_rate)
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = pairs[order[lo:lo + cfg.batch_size]]
            u, i = batch[:, 0], batch[:, 1]
            j = sample_negatives(rng, u, positive_sets, n_items)
            su = model.p[u]
            diff = np.einsum("bd,bd->b", su, model.q[i] - model.q[j]) \
                + model.b_item[i] - model.b_item[j]
            epoch_loss += float(softplus(-diff).sum())
            g = sigmoid(diff) - 1.0
            grads = {name: 2.0 * cfg.l2 * p for name, p in params.items()}
            np.add.at(grads["p"], u, g[:, None] * (model.q[i] - model.q[j]))
            np.add.at(grads["q"], i, g[:, None] * su)
            np.add.at(grads["q"], j, -g[:, None] * su)
            np.add.at(grads["b_item"], i, g)
            np.add.at(grads["b_item"], j, -g)
            adam_step(adam, params, grads)
        mean_loss = epoch_loss / len(pairs)
        if not np.isfinite(mean_loss):
            raise DivergenceError(f"non-finite BPR loss: {mean_loss}")
        losses.append(mean_loss)
    return model, losses
