"""Front-door preference estimation and its BPR training loop.

The estimator scores a (user, item) pair as

    y(u, v) = (1/d) * sum_j sum_{v' in R(u, v)} P(v'|u) * f(u, v', m_j)

where R(u, v) is the target item plus n uniformly sampled items, m_j are
feature draws around the target item's inherent features, P(v'|u) comes
from a frozen exposure model, and f is a dot product between the user
embedding and an MLP over the item embedding and features.

Two ablations share the machinery: ``ns`` drops the sampled items and
scores P(v|u) * f(u, v, m_v); ``nd`` drops the adjustment entirely and
scores f(u, v, m_v). Gradients flow only to the user/item embeddings and
the MLP; features and exposure weights are frozen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import ItemFeatureTable, SplitResult
from .exposure import ExposureModel
from .mf import BprConfig, sample_negatives, train_bpr
from .numerics import (AdamState, DivergenceError, EmbeddingTable, MlpParams,
                       adam_step, mlp_backward, mlp_forward, sigmoid, softplus)
from .rng import substream

VARIANTS = ("full", "ns", "nd")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.003
    l2: float = 1e-4
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    variant: str = "full"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if min(self.learning_rate, self.batch_size, self.epochs + 1) <= 0:
            raise ValueError("learning rate and batch size must be positive")


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    wall_time_s: float


class DccfModel:
    def __init__(self, user_emb: EmbeddingTable, item_emb: EmbeddingTable,
                 mlp: MlpParams, exposure: ExposureModel, features: ItemFeatureTable,
                 n_sampled_items: int = 20, n_feature_samples: int = 2,
                 sigma_m: float = 0.1, sigma_is_std: bool = False,
                 variant: str = "full", compute_dtype: str = "float64"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if compute_dtype not in ("float64", "float32"):
            raise ValueError(f"unsupported compute dtype {compute_dtype!r}")
        if mlp.input_dim != item_emb.dim + features.dim:
            raise ValueError(
                f"mlp input dim {mlp.input_dim} != item dim {item_emb.dim} "
                f"+ feature dim {features.dim}")
        if mlp.output_dim != user_emb.dim:
            raise ValueError("mlp output dim must match the user embedding dim")
        if n_sampled_items < 0 or n_feature_samples < 1 or sigma_m < 0:
            raise ValueError("bad sampling configuration")
        self.user_emb = user_emb
        self.item_emb = item_emb
        self.mlp = mlp
        self.exposure = exposure
        self.features = features
        self.n_sampled_items = n_sampled_items
        self.n_feature_samples = n_feature_samples
        self.sigma_m = sigma_m
        self.sigma_is_std = sigma_is_std
        self.variant = variant
        self.compute_dtype = np.dtype(compute_dtype)

    @property
    def n_users(self) -> int:
        return self.user_emb.rows

    @property
    def n_items(self) -> int:
        return self.item_emb.rows

    @property
    def feature_noise_std(self) -> float:
        return self.sigma_m if self.sigma_is_std else float(np.sqrt(self.sigma_m))

    def params(self) -> dict:
        out = {"user_emb": self.user_emb.values, "item_emb": self.item_emb.values}
        for i, w in enumerate(self.mlp.weights):
            out[f"mlp/w{i}"] = w
        return out

    def tensors(self) -> dict:
        """All tensors needed to restore scoring, exposure included."""
        out = dict(self.params())
        out.update(self.exposure.tensors())
        return out


def create_model(n_users: int, n_items: int, features: ItemFeatureTable,
                 exposure: ExposureModel, seed: int, dim: int = 32,
                 mlp_hidden=(64,), n_sampled_items: int = 20,
                 n_feature_samples: int = 2, sigma_m: float = 0.1,
                 sigma_is_std: bool = False, variant: str = "full",
                 mlp_bias: bool = True, mlp_final_activation: bool = True,
                 compute_dtype: str = "float64") -> DccfModel:
    """Fresh model with seeded initialization."""
    rng = substream(seed, "model-init")
    user_emb = EmbeddingTable(n_users, dim, rng)
    item_emb = EmbeddingTable(n_items, dim, rng)
    dims = (dim + features.dim,) + tuple(mlp_hidden) + (dim,)
    mlp = MlpParams.create(dims, rng, use_bias=mlp_bias,
                           final_activation=mlp_final_activation)
    return DccfModel(user_emb, item_emb, mlp, exposure, features,
                     n_sampled_items=n_sampled_items,
                     n_feature_samples=n_feature_samples,
                     sigma_m=sigma_m, sigma_is_std=sigma_is_std, variant=variant,
                     compute_dtype=compute_dtype)


def conditional_preference(model: DccfModel, u: int, v_prime: int, m) -> float:
    """f(u, v', m): user dot MLP([item embedding; features])."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (model.features.dim,):
        raise ValueError(f"feature vector must have length {model.features.dim}")
    x = np.concatenate([model.item_emb.values[v_prime], m])
    out, _ = mlp_forward(model.mlp, x)
    return float(out @ model.user_emb.values[u])


def sample_features(model: DccfModel, v: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """d independent Gaussian draws centered on the item's feature vector."""
    base = model.features.vectors[v]
    noise = rng.normal(size=(d, model.features.dim))
    return base[None, :] + model.feature_noise_std * noise


def sample_item_set(model: DccfModel, u: int, v: int, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """R(u, v): the target item plus n distinct uniform items != v."""
    return _sample_item_sets(rng, np.array([v], dtype=np.int64), n, model.n_items)[0]


def _sample_item_sets(rng: np.random.Generator, targets: np.ndarray, n: int,
                      n_items: int) -> np.ndarray:
    """(B, n+1) index sets: column 0 is the target, the rest n distinct others."""
    if n >= n_items:
        raise ValueError(f"cannot sample {n} items from a catalog of {n_items}")
    batch = targets.size
    out = np.empty((batch, n + 1), dtype=np.int64)
    out[:, 0] = targets
    if n == 0:
        return out
    if n == n_items - 1:
        all_items = np.arange(n_items, dtype=np.int64)
        for b, t in enumerate(targets):
            out[b, 1:] = all_items[all_items != t]
        return out
    if n > (n_items - 1) // 2:
        for b, t in enumerate(targets):
            perm = rng.permutation(n_items - 1)[:n].astype(np.int64)
            out[b, 1:] = perm + (perm >= t)
        return out
    cand = rng.integers(0, n_items - 1, size=(batch, n))
    cand += cand >= targets[:, None]
    if n > 1:
        while True:
            srt = np.sort(cand, axis=1)
            bad = (np.diff(srt, axis=1) == 0).any(axis=1)
            if not bad.any():
                break
            redraw = rng.integers(0, n_items - 1, size=(int(bad.sum()), n))
            redraw += redraw >= targets[bad, None]
            cand[bad] = redraw
    out[:, 1:] = cand
    return out


def _assemble(model: DccfModel, users: np.ndarray, items: np.ndarray,
              rng: np.random.Generator):
    """Index sets R, exposure weights, and feature draws for a batch."""
    batch = users.size
    if model.variant == "full":
        sets = _sample_item_sets(rng, items, model.n_sampled_items, model.n_items)
        weights = model.exposure.weights_batch(users, sets)
        d = model.n_feature_samples
        feats = model.features.vectors[items][:, None, :] \
            + model.feature_noise_std * rng.normal(size=(batch, d, model.features.dim))
    else:
        sets = items[:, None]
        feats = model.features.vectors[items][:, None, :]
        if model.variant == "ns":
            weights = model.exposure.weights_batch(users, sets)
        else:
            weights = np.ones((batch, 1))
    return sets, weights, feats


def _forward_batch(model: DccfModel, users: np.ndarray, items: np.ndarray,
                   rng: np.random.Generator, need_cache: bool = False):
    """Batched estimate; returns (y, cache) with cache for _backward_batch."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    sets, weights, feats = _assemble(model, users, items, rng)
    return _forward_assembled(model, users, sets, weights, feats, need_cache)


def _forward_assembled(model: DccfModel, users: np.ndarray, sets: np.ndarray,
                       weights: np.ndarray, feats: np.ndarray,
                       need_cache: bool = False):
    """Estimate from pre-drawn item sets, weights, and feature samples."""
    dt = model.compute_dtype
    batch, n1 = sets.shape
    d = feats.shape[1]
    d_item = model.item_emb.dim
    d_in = d_item + model.features.dim
    inputs = np.empty((batch, n1, d, d_in), dtype=dt)
    inputs[..., :d_item] = model.item_emb.values[sets][:, :, None, :]
    inputs[..., d_item:] = feats[:, None, :, :]
    out, mlp_cache = mlp_forward(model.mlp, inputs.reshape(-1, d_in))
    out = out.reshape(batch, n1, d, -1)
    user_vecs = model.user_emb.values[users].astype(dt, copy=False)
    w = weights.astype(dt, copy=False)
    f = np.einsum("brjk,bk->brj", out, user_vecs)
    y = ((w[:, :, None] * f).sum(axis=(1, 2)) / d).astype(np.float64)
    cache = None
    if need_cache:
        cache = (users, sets, w, out, mlp_cache, user_vecs, d)
    return y, cache


def _backward_batch(model: DccfModel, cache, dl_dy: np.ndarray, grads: dict) -> None:
    """Accumulate gradients of sum_b dl_dy[b] * y_b into ``grads``."""
    users, sets, weights, out, mlp_cache, user_vecs, d = cache
    batch, n1 = weights.shape
    scaled = (dl_dy.astype(weights.dtype)[:, None] * weights) / d
    df = np.broadcast_to(scaled[:, :, None], (batch, n1, d))
    np.add.at(grads["user_emb"], users, np.einsum("brj,brjk->bk", df, out))
    gout = df[..., None] * user_vecs[:, None, None, :]
    w_grads, gin = mlp_backward(model.mlp, mlp_cache, gout.reshape(-1, out.shape[-1]))
    for i, wg in enumerate(w_grads):
        grads[f"mlp/w{i}"] += wg
    d_item = model.item_emb.dim
    gin_items = gin[:, :d_item].reshape(sets.shape[0], sets.shape[1], -1, d_item).sum(axis=2)
    np.add.at(grads["item_emb"], sets, gin_items)


def estimate_preference(model: DccfModel, u: int, v: int,
                        rng: np.random.Generator) -> float:
    """Estimated preference of one pair under the model's variant."""
    y, _ = _forward_batch(model, np.array([u]), np.array([v]), rng)
    return float(y[0])


def oracle_estimate(model: DccfModel, u: int, v: int) -> float:
    """Exact full-catalog sum with no feature noise.

    sum over every item v' of P(v'|u) f(u, v', m_v); the reference the
    sampled estimator converges to as n covers the catalog and sigma -> 0.
    """
    items = np.arange(model.n_items, dtype=np.int64)
    weights = model.exposure.weights(u, items)
    inputs = np.concatenate([
        model.item_emb.values,
        np.tile(model.features.vectors[v], (model.n_items, 1)),
    ], axis=1)
    out, _ = mlp_forward(model.mlp, inputs)
    f = out @ model.user_emb.values[u]
    return float((weights * f).sum())


def bpr_pair_loss(y_pos: float, y_neg: float) -> float:
    """-ln sigmoid(y_pos - y_neg)."""
    return float(softplus(-(y_pos - y_neg)))


def train(model: DccfModel, split: SplitResult, cfg: TrainConfig):
    """Pairwise training over the split's train pairs (Adam, mini-batches).

    Per positive pair, a negative item outside the user's train positives
    is sampled; both sides get fresh item sets and feature draws every
    epoch. Returns the per-epoch loss trace.
    """
    pairs = np.asarray(split.train, dtype=np.int64)
    if pairs.size == 0:
        raise ValueError("empty training split")
    positive_sets = [set() for _ in range(model.n_users)]
    for u, v in split.train:
        positive_sets[u].add(int(v))
    params = model.params()
    adam = AdamState.for_params(params, cfg.learning_rate)
    rng = substream(cfg.seed, "train")
    trace = []
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = pairs[order[lo:lo + cfg.batch_size]]
            u, v = batch[:, 0], batch[:, 1]
            v_neg = sample_negatives(rng, u, positive_sets, model.n_items)
            y_pos, cache_pos = _forward_batch(model, u, v, rng, need_cache=True)
            y_neg, cache_neg = _forward_batch(model, u, v_neg, rng, need_cache=True)
            diff = y_pos - y_neg
            l2_term = cfg.l2 * sum(float((p * p).sum()) for p in params.values())
            batch_loss = float(softplus(-diff).sum()) + l2_term
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}")
            g_y = -sigmoid(-diff)
            grads = {name: 2.0 * cfg.l2 * p for name, p in params.items()}
            _backward_batch(model, cache_pos, g_y, grads)
            _backward_batch(model, cache_neg, -g_y, grads)
            adam_step(adam, params, grads)
            epoch_loss += batch_loss
        trace.append(EpochRecord(epoch, epoch_loss / len(pairs),
                                 time.perf_counter() - started))
    return trace


def train_mf_baseline(table, cfg: BprConfig, seed: int):
    """BPR matrix factorization on the table's positives (the train view)."""
    rng = substream(seed, "train")
    return train_bpr(table.n_users, table.n_items, table.positive_pairs(),
                     table.positive_sets, cfg, rng)


def make_scorer(model: DccfModel):
    """Evaluation scorer: (user, candidate items, rng) -> scores."""

    def score(u: int, items, rng: np.random.Generator) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        y, _ = _forward_batch(model, np.full(items.size, u, dtype=np.int64), items, rng)
        return y

    return score


def make_mf_scorer(mf_model):
    def score(u: int, items, rng: np.random.Generator) -> np.ndarray:
        return mf_model.raw_scores(u, items)

    return score
