"""Dense numeric building blocks with hand-written gradients.

Everything here operates on plain float64 numpy arrays: embedding tables,
a small ReLU MLP with an explicit backward pass, stable sigmoid, Adam,
and a central-finite-difference gradient checker used by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when an optimization step sees non-finite numbers."""


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def softplus(x):
    """log(1 + exp(x)) without overflow; softplus(-t) == -ln(sigmoid(t))."""
    return np.logaddexp(0.0, x)


class EmbeddingTable:
    """Row-indexed dense parameter matrix, initialized N(0, scale)."""

    def __init__(self, rows: int, dim: int, rng: np.random.Generator, scale: float = 0.1):
        if rows <= 0 or dim <= 0:
            raise ValueError("rows and dim must be positive")
        self.values = rng.normal(0.0, scale, size=(rows, dim))

    @classmethod
    def from_values(cls, values) -> "EmbeddingTable":
        table = cls.__new__(cls)
        table.values = np.asarray(values, dtype=np.float64)
        if table.values.ndim != 2:
            raise ValueError("embedding values must be a matrix")
        return table

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def lookup(self, idx):
        return self.values[idx]


@dataclass
class MlpParams:
    """Stacked ReLU layers; biases live in the last row of each weight.

    With ``final_activation`` the rectifier is applied after every layer,
    including the last, so outputs are non-negative; turning it off leaves
    the last layer linear. ``use_bias=False`` drops the bias rows entirely.
    """

    weights: list
    use_bias: bool = True
    final_activation: bool = True

    @classmethod
    def create(cls, dims, rng: np.random.Generator, use_bias: bool = True,
               final_activation: bool = True) -> "MlpParams":
        """Glorot-uniform init for the layer sizes in ``dims``."""
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        weights = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_in + (1 if use_bias else 0), fan_out))
            if use_bias:
                w[-1, :] = 0.0
            weights.append(w)
        return cls(weights=weights, use_bias=use_bias, final_activation=final_activation)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0] - (1 if self.use_bias else 0)

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]


def _augment(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x, np.ones((x.shape[0], 1), dtype=x.dtype)], axis=1)


def mlp_forward(params: MlpParams, x):
    """Forward pass; returns (output, cache) where cache feeds mlp_backward.

    Accepts a single vector or an (N, input_dim) batch. Compute runs in the
    input's float dtype (weights are cast to match), so callers choose
    between 64-bit exactness and 32-bit speed.
    """
    x = np.asarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.input_dim:
        raise ValueError(f"input dim {x.shape[1]} != expected {params.input_dim}")
    cache = []
    h = x
    n_layers = len(params.weights)
    for i, w in enumerate(params.weights):
        inp = _augment(h) if params.use_bias else h
        lin = inp @ w.astype(x.dtype, copy=False)
        activate = params.final_activation or i < n_layers - 1
        cache.append((inp, lin, activate))
        h = np.maximum(lin, 0.0) if activate else lin
    return (h[0] if single else h), cache


def mlp_backward(params: MlpParams, cache, output_grad):
    """Reverse-mode gradients for one cached forward pass.

    Returns (per-layer weight grads, gradient w.r.t. the input batch).
    The ReLU subgradient at exactly zero is taken to be zero.
    """
    g = np.asarray(output_grad)
    dtype = cache[0][0].dtype
    if g.dtype != dtype:
        g = g.astype(dtype)
    single = g.ndim == 1
    if single:
        g = g[None, :]
    weight_grads = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        inp, lin, activate = cache[i]
        if activate:
            g = g * (lin > 0.0)
        weight_grads[i] = inp.T @ g
        g = g @ params.weights[i].T.astype(dtype, copy=False)
        if params.use_bias:
            g = g[:, :-1]
    return weight_grads, (g[0] if single else g)


@dataclass
class AdamState:
    """Adam with bias correction; one shared step count for all tensors."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr: float) -> "AdamState":
        state = cls(lr=lr)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(state: AdamState, params: dict, grads: dict) -> None:
    """One in-place Adam update over a dict of named tensors."""
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for {name!r} at step {t}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class GradCheckReport:
    tolerance: float
    per_param: dict

    @property
    def max_rel_error(self) -> float:
        return max(self.per_param.values())

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(loss_fn, params: dict, analytic_grads: dict,
               tolerance: float = 1e-4, step: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` maps a dict of named tensors to a scalar and must be
    deterministic (freeze any randomness before calling). Relative error
    uses max(|analytic|, |numeric|, 1e-6) as the denominator.
    """
    probe = {name: p.copy() for name, p in params.items()}
    per_param = {}
    for name, p in probe.items():
        worst = 0.0
        flat = p.reshape(-1)
        analytic = np.asarray(analytic_grads[name], dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(probe)
            flat[i] = orig - step
            down = loss_fn(probe)
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(analytic[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
        per_param[name] = worst
    return GradCheckReport(tolerance=tolerance, per_param=per_param)
