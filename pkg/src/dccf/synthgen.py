"""Synthetic confounded-feedback worlds and the SD1/SD2 dataset presets.

A world holds ground-truth user/item latents, small tanh networks mapping
item latents to inherent features and (user, feature) pairs to preference
scores, plus an unobserved per-user confounder. Training interactions are
sampled from scores that include the confounder; test interactions from
scores that do not, giving an unbiased test set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import InteractionTable, ItemFeatureTable, SplitResult, write_split
from .rng import substream

_HIDDEN = 32


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 900
    n_items: int = 1000
    train_per_user: int = 20
    test_per_user: int = 5
    feature_dim: int = 16
    latent_dim: int = 16
    confounder_strength: float = 2.0
    direct_effect_scale: float = 0.0
    selection_sharpness: float = 3.0
    global_confounder: bool = False
    seed: int = 0

    def __post_init__(self):
        if min(self.n_users, self.n_items, self.train_per_user, self.test_per_user,
               self.feature_dim, self.latent_dim) <= 0:
            raise ValueError("all counts must be positive")
        if self.train_per_user + self.test_per_user > self.n_items:
            raise ValueError("per-user interactions exceed the catalog size")
        if self.confounder_strength < 0 or self.direct_effect_scale < 0:
            raise ValueError("effect scales must be non-negative")


def _net(rng: np.random.Generator, dims):
    """Bias-free layer stack, weights N(0, 1/sqrt(fan_in))."""
    return [rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
            for fan_in, fan_out in zip(dims[:-1], dims[1:])]


def _net_forward(weights, x: np.ndarray) -> np.ndarray:
    h = x
    for w in weights[:-1]:
        h = np.tanh(h @ w)
    return h @ weights[-1]


def _standardize(a: np.ndarray) -> np.ndarray:
    return (a - a.mean()) / a.std()


@dataclass
class GroundTruthWorld:
    config: SynthConfig
    user_latents: np.ndarray
    item_latents: np.ndarray
    feature_net_weights: list
    preference_net_weights: list
    direct_net_weights: list
    confounder_draws: np.ndarray
    confounder_item_loadings: np.ndarray
    item_features: np.ndarray
    true_scores: np.ndarray
    train_scores: np.ndarray


def generate_world(cfg: SynthConfig) -> GroundTruthWorld:
    """Deterministically build a world from the config seed.

    The preference, direct-effect and confounder score components are
    standardized over all (user, item) pairs so the configured strengths
    are relative to a unit-variance preference signal.
    """
    rng = substream(cfg.seed, "world")
    user_latents = rng.normal(size=(cfg.n_users, cfg.latent_dim))
    item_latents = rng.normal(size=(cfg.n_items, cfg.latent_dim))
    feature_net = _net(rng, (cfg.latent_dim, _HIDDEN, cfg.feature_dim))
    preference_net = _net(rng, (cfg.latent_dim + cfg.feature_dim, _HIDDEN, 1))
    direct_net = _net(rng, (2 * cfg.latent_dim, _HIDDEN, 1))
    if cfg.global_confounder:
        confounder_draws = np.full(cfg.n_users, rng.normal())
    else:
        confounder_draws = rng.normal(size=cfg.n_users)
    confounder_item_loadings = rng.normal(size=cfg.n_items)
    return derive_world(cfg, user_latents, item_latents, feature_net, preference_net,
                        direct_net, confounder_draws, confounder_item_loadings)


def derive_world(cfg: SynthConfig, user_latents, item_latents, feature_net,
                 preference_net, direct_net, confounder_draws,
                 confounder_item_loadings) -> GroundTruthWorld:
    """Compute features and score matrices from fixed latents and networks."""
    item_features = _net_forward(feature_net, item_latents)

    preference = np.empty((cfg.n_users, cfg.n_items))
    direct = np.empty((cfg.n_users, cfg.n_items))
    chunk = max(1, 2_000_000 // cfg.n_items)
    for lo in range(0, cfg.n_users, chunk):
        hi = min(lo + chunk, cfg.n_users)
        users = user_latents[lo:hi]
        pref_in = np.concatenate([
            np.repeat(users, cfg.n_items, axis=0),
            np.tile(item_features, (hi - lo, 1)),
        ], axis=1)
        preference[lo:hi] = _net_forward(preference_net, pref_in).reshape(hi - lo, -1)
        direct_in = np.concatenate([
            np.repeat(users, cfg.n_items, axis=0),
            np.tile(item_latents, (hi - lo, 1)),
        ], axis=1)
        direct[lo:hi] = _net_forward(direct_net, direct_in).reshape(hi - lo, -1)

    confounder = np.outer(confounder_draws, confounder_item_loadings)
    true_scores = _standardize(preference) + cfg.direct_effect_scale * _standardize(direct)
    train_scores = true_scores + cfg.confounder_strength * _standardize(confounder)
    return GroundTruthWorld(
        config=cfg,
        user_latents=user_latents,
        item_latents=item_latents,
        feature_net_weights=feature_net,
        preference_net_weights=preference_net,
        direct_net_weights=direct_net,
        confounder_draws=confounder_draws,
        confounder_item_loadings=confounder_item_loadings,
        item_features=item_features,
        true_scores=true_scores,
        train_scores=train_scores,
    )


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    e = np.exp(z)
    return e / e.sum()


def _draw_without_replacement(rng: np.random.Generator, probs: np.ndarray, k: int):
    """k distinct indices by iterative renormalization of the weight vector."""
    p = probs.copy()
    out = np.empty(k, dtype=np.int64)
    for i in range(k):
        c = np.cumsum(p)
        idx = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        idx = min(idx, len(p) - 1)
        out[i] = idx
        p[idx] = 0.0
    return out


def selection_distributions(world: GroundTruthWorld, user: int):
    """(train, test) single-draw item distributions for one user."""
    sharp = world.config.selection_sharpness
    return (_softmax(sharp * world.train_scores[user]),
            _softmax(sharp * world.true_scores[user]))


def sample_dataset(world: GroundTruthWorld, cfg: SynthConfig):
    """Sample per-user train/test interactions from the world.

    Train items come from the confounded scores, test items from the
    unconfounded scores over the items not already used for training.
    Returns (InteractionTable, ItemFeatureTable, SplitResult).
    """
    rng = substream(cfg.seed, "sample")
    train_pairs, test_pairs = [], []
    positives = []
    for u in range(cfg.n_users):
        p_train, p_test = selection_distributions(world, u)
        train_items = _draw_without_replacement(rng, p_train, cfg.train_per_user)
        remaining = p_test.copy()
        remaining[train_items] = 0.0
        test_items = _draw_without_replacement(rng, remaining, cfg.test_per_user)
        train_pairs.extend((u, int(v)) for v in train_items)
        test_pairs.extend((u, int(v)) for v in test_items)
        positives.append(np.concatenate([train_items, test_items]))
    table = InteractionTable(
        [f"u{u}" for u in range(cfg.n_users)],
        [f"i{v}" for v in range(cfg.n_items)],
        positives,
    )
    features = ItemFeatureTable(dim=cfg.feature_dim, vectors=world.item_features)
    split = SplitResult(train=train_pairs, validation=[], test=test_pairs)
    return table, features, split


def write_dataset(outdir, table: InteractionTable, features: ItemFeatureTable,
                  split: SplitResult, cfg: SynthConfig) -> None:
    """Emit interactions/features/split TSVs plus a config manifest."""
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "interactions.tsv", "w", encoding="utf-8") as fh:
        for u, v in split.all_pairs():
            fh.write(f"{table.user_ids[u]}\t{table.item_ids[v]}\t5.0\n")
    with open(outdir / "features.tsv", "w", encoding="utf-8") as fh:
        for idx, iid in enumerate(table.item_ids):
            values = "\t".join(repr(float(x)) for x in features.vectors[idx])
            fh.write(f"{iid}\t{values}\n")
    write_split(split, table, outdir / "train.tsv", outdir / "validation.tsv",
                outdir / "test.tsv")
    manifest = {
        "kind": "synthetic-dataset",
        "strategy": "synthetic",
        "config": asdict(cfg),
        "seed": cfg.seed,
        "counts": {
            "train": len(split.train),
            "validation": len(split.validation),
            "test": len(split.test),
        },
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
