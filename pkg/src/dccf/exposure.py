"""Exposure models: per-(user, item) weights standing in for P(v | u).

Four variants:

* ``random``  - a fixed seeded draw in (0, 1) per (user, item);
* ``uniform`` - every item equally likely, 1 / |V|;
* ``bias``    - sigmoid of a pairwise-trained factorization score;
* ``unbias``  - the bias weight divided by an item propensity score,
  clamped to [0, weight_cap].

Trained models are frozen: scoring never mutates state, and repeated
calls return bitwise-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InteractionTable
from .mf import BprConfig, MfModel, train_bpr
from .numerics import sigmoid
from .rng import hash_uniform, substream

VARIANTS = ("random", "uniform", "bias", "unbias")


@dataclass(frozen=True)
class ExposureConfig:
    variant: str = "unbias"
    dim: int = 32
    learning_rate: float = 0.01
    l2: float = 1e-4
    epochs: int = 20
    batch_size: int = 128
    eta: float = 0.5
    weight_cap: float = 10.0
    use_sigmoid: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown exposure variant {self.variant!r}")


def propensity(table: InteractionTable, eta: float) -> np.ndarray:
    """Item propensities (count_v / max count) ** eta, in (0, 1].

    Items with no positive interactions get the smallest observed nonzero
    ratio before exponentiation, so downstream divisions stay finite.
    """
    counts = table.item_popularity().astype(np.float64)
    top = counts.max()
    if top <= 0:
        raise ValueError("propensity needs at least one positive interaction")
    ratio = counts / top
    floor = ratio[ratio > 0].min()
    ratio[ratio == 0] = floor
    return ratio ** eta


class ExposureModel:
    """Frozen exposure-weight provider for one of the four variants."""

    def __init__(self, variant: str, n_items: int, cfg: ExposureConfig,
                 mf: MfModel | None = None, propensities: np.ndarray | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown exposure variant {variant!r}")
        if variant in ("bias", "unbias") and mf is None:
            raise ValueError(f"variant {variant!r} needs a trained factorization")
        if variant == "unbias" and propensities is None:
            raise ValueError("variant 'unbias' needs propensities")
        self.variant = variant
        self.n_items = n_items
        self.cfg = cfg
        self.mf = mf
        if propensities is not None:
            propensities = np.asarray(propensities, dtype=np.float64)
            if np.any(propensities <= 0) or np.any(propensities > 1):
                raise ValueError("propensities must lie in (0, 1]")
        self.propensities = propensities

    def weights(self, u: int, items) -> np.ndarray:
        """Exposure weights for one user over an array of item indices."""
        items = np.atleast_1d(np.asarray(items, dtype=np.int64))
        return self.weights_batch(np.array([u], dtype=np.int64), items[None, :])[0]

    def weights_batch(self, users, items) -> np.ndarray:
        """Row b of the result holds the weights of items[b] for users[b]."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if np.any(items < 0) or np.any(items >= self.n_items):
            raise IndexError("item index out of range")
        if self.variant == "uniform":
            return np.full(items.shape, 1.0 / self.n_items)
        if self.variant == "random":
            return hash_uniform(self.cfg.seed, users[:, None], items)
        raw = np.einsum("bkd,bd->bk", self.mf.q[items], self.mf.p[users]) \
            + self.mf.b_user[users][:, None] + self.mf.b_item[items] \
            + float(self.mf.b_global)
        w = sigmoid(raw) if self.cfg.use_sigmoid else raw
        if self.variant == "bias":
            return np.asarray(w, dtype=np.float64)
        corrected = w / self.propensities[items]
        return np.clip(corrected, 0.0, self.cfg.weight_cap)

    def weight(self, u: int, v: int) -> float:
        return float(self.weights(u, np.array([v]))[0])

    def tensors(self) -> dict:
        """Named tensors for the checkpoint container (metadata lives in manifests)."""
        out = {}
        if self.mf is not None:
            for name, arr in self.mf.params().items():
                out[f"exposure/{name}"] = arr
        if self.propensities is not None:
            out["exposure/propensities"] = self.propensities
        return out

    @classmethod
    def from_tensors(cls, variant: str, n_items: int, cfg: ExposureConfig,
                     tensors: dict) -> "ExposureModel":
        mf = None
        if variant in ("bias", "unbias"):
            mf = MfModel(tensors["exposure/p"], tensors["exposure/q"],
                         tensors["exposure/b_user"], tensors["exposure/b_item"],
                         tensors["exposure/b_global"])
        propensities = tensors.get("exposure/propensities")
        return cls(variant, n_items, cfg, mf=mf, propensities=propensities)


def untrained_exposure(variant: str, n_items: int, cfg: ExposureConfig) -> ExposureModel:
    """Construct the random/uniform diagnostic variants (no training)."""
    if variant not in ("random", "uniform"):
        raise ValueError(f"variant {variant!r} requires training")
    return ExposureModel(variant, n_items, cfg)


def train_exposure(table: InteractionTable, cfg: ExposureConfig):
    """Fit the factorization on the given (training) interactions.

    Interacted items are treated as exposed positives; one non-interacted
    item per positive is resampled each epoch as the negative. Returns the
    frozen model and the per-epoch loss trace.
    """
    if cfg.variant not in ("bias", "unbias"):
        raise ValueError(f"variant {cfg.variant!r} is not trainable")
    rng = substream(cfg.seed, "exposure-train")
    bpr_cfg = BprConfig(dim=cfg.dim, learning_rate=cfg.learning_rate, l2=cfg.l2,
                        epochs=cfg.epochs, batch_size=cfg.batch_size)
    mf, losses = train_bpr(table.n_users, table.n_items, table.positive_pairs(),
                           table.positive_sets, bpr_cfg, rng)
    props = propensity(table, cfg.eta) if cfg.variant == "unbias" else None
    model = ExposureModel(cfg.variant, table.n_items, cfg, mf=mf, propensities=props)
    return model, losses
