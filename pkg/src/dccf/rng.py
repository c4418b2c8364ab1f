"""Seeded randomness: named sub-streams and a counter-based uniform hash.

Every stochastic component of a run draws from its own generator, derived
from the single run seed plus a fixed stream code, so that e.g. changing
the number of training epochs does not perturb the evaluation negatives.
"""

from __future__ import annotations

import numpy as np

_STREAMS = {
    "split": 11,
    "world": 12,
    "sample": 13,
    "exposure-init": 14,
    "exposure-train": 15,
    "model-init": 16,
    "train": 17,
    "eval": 18,
    "random-exposure": 19,
}


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for one named consumer of a run seed."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    try:
        code = _STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown stream name: {name!r}") from None
    return np.random.default_rng([seed, code, *extra])


_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + _M1).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M2
    z = (z ^ (z >> np.uint64(27))) * _M3
    return z ^ (z >> np.uint64(31))


def hash_uniform(key: int, a, b) -> np.ndarray:
    """Deterministic uniform draw in (0, 1) indexed by (key, a, b).

    Pure function of its inputs: repeated calls with the same arguments
    return the same values, in any order, on any platform.
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _splitmix64(np.uint64(key) ^ _splitmix64(a ^ _splitmix64(b)))
    # 53 mantissa bits, offset by half an ulp so 0.0 is never returned
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)
