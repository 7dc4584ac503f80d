"""Two-hidden-layer ReLU network with sigmoid outputs and SINR-based losses.

The network maps standardized log10 aggregated LSF coefficients to power
coefficients in (0, 1). Everything is plain numpy in float64: forward and
backward passes are written out by hand, and the losses come with exact
gradients obtained by the chain rule through the closed-form SINR.

Weights are stored as (fan_in, fan_out) matrices; a layer computes
``x @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .metrics import SinrCoefficients, sinr, sinr_vjp

CHECKPOINT_FORMAT_VERSION = 1
LOSS_KINDS = ("maxmin", "maxmin_prior", "sum_rate", "product")
LN2 = np.log(2.0)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class MlpModel:
    dims: tuple
    weights: tuple
    biases: tuple
    norm_mean: np.ndarray
    norm_std: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[i], self.dims[i + 1]) or b.shape != (self.dims[i + 1],):
                raise ValueError(f"layer {i + 1} shapes {w.shape}, {b.shape} do not match dims {self.dims}")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat_params(self) -> np.ndarray:
        """Parameters as one vector in the order W1, b1, W2, b2, W3, b3 (row-major)."""
        return np.concatenate([p.ravel() for wb in zip(self.weights, self.biases) for p in wb])

    def with_flat_params(self, flat) -> "MlpModel":
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.size}")
        ws, bs, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(flat[pos:pos + w.size].reshape(w.shape)); pos += w.size
            bs.append(flat[pos:pos + b.size].copy()); pos += b.size
        return MlpModel(self.dims, tuple(ws), tuple(bs), self.norm_mean, self.norm_std)

    def with_norm_stats(self, mean, std) -> "MlpModel":
        return MlpModel(self.dims, self.weights, self.biases,
                        np.asarray(mean, dtype=float), np.asarray(std, dtype=float))

    def to_json(self, loss=None, train_seed=None, meta=None) -> str:
        doc = {
            "format": "cfpower.mlp",
            "version": CHECKPOINT_FORMAT_VERSION,
            "dims": list(self.dims),
            "layer_order": "W1,b1,W2,b2,W3,b3; W row-major with shape (fan_in, fan_out)",
            "norm_mean": self.norm_mean.tolist(),
            "norm_std": self.norm_std.tolist(),
            "params": self.flat_params().tolist(),
            "loss": loss.to_dict() if loss is not None else None,
            "train_seed": train_seed,
            "meta": meta or {},
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        doc = json.loads(text)
        if doc.get("format") != "cfpower.mlp" or doc.get("version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError("not a version-1 cfpower checkpoint")
        dims = tuple(doc["dims"])
        shell = init_mlp(dims, seed=0, zero=True)
        return shell.with_flat_params(doc["params"]).with_norm_stats(doc["norm_mean"], doc["norm_std"])


def read_checkpoint(text: str):
    """Model, loss spec (or None), training seed and metadata from checkpoint JSON."""
    doc = json.loads(text)
    model = MlpModel.from_json(text)
    loss = LossSpec.from_dict(doc["loss"]) if doc.get("loss") else None
    return model, loss, doc.get("train_seed"), doc.get("meta", {})


def init_mlp(dims, seed: int = 0, zero: bool = False) -> MlpModel:
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases.

    ``zero=True`` gives an all-zero network, whose output is 0.5 everywhere.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer widths {dims}")
    if dims[0] != dims[-1]:
        raise ValueError("input and output widths must both equal K")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        if zero:
            weights.append(np.zeros((fan_in, fan_out)))
        else:
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    K = dims[0]
    return MlpModel(dims, tuple(weights), tuple(biases), np.zeros(K), np.ones(K))


@dataclass(frozen=True)
class ForwardCache:
    model: MlpModel
    inputs: list = field(default_factory=list)       # layer inputs
    preacts: list = field(default_factory=list)      # layer pre-activations
    output: np.ndarray | None = None


def features(m: MlpModel, B) -> np.ndarray:
    return (np.log10(B) - m.norm_mean) / m.norm_std


def forward(m: MlpModel, B):
    """Power coefficients for aggregated LSF ``B`` (shape (K,) or (N, K))."""
    B = np.asarray(B, dtype=float)
    if B.shape[-1] != m.dims[0]:
        raise ValueError(f"input has {B.shape[-1]} users, model expects {m.dims[0]}")
    if not np.all(np.isfinite(B)) or np.any(B <= 0):
        raise ValueError("aggregated LSF must be positive and finite")
    x = features(m, B)
    inputs, preacts = [], []
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        inputs.append(x)
        z = x @ w + b
        preacts.append(z)
        x = _sigmoid(z) if i == last else np.maximum(z, 0.0)
    return x, ForwardCache(m, inputs, preacts, x)


def backward(m: MlpModel, cache: ForwardCache, dloss_deta):
    """Parameter gradients given dLoss/deta; returns (dW list, db list).

    Batched inputs are summed over the batch axis, so pass dLoss/deta
    already divided by the batch size when the loss is a batch mean.
    """
    if cache.model is not m:
        raise ValueError("stale forward cache: it was produced by a different model")
    z_out = cache.preacts[-1]
    delta = np.asarray(dloss_deta, dtype=float) * _sigmoid(z_out) * _sigmoid(-z_out)
    dws, dbs = [], []
    for i in range(len(m.weights) - 1, -1, -1):
        x = cache.inputs[i]
        if x.ndim == 1:
            dws.append(np.outer(x, delta)); dbs.append(delta.copy())
        else:
            dws.append(x.T @ delta); dbs.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ m.weights[i].T) * (cache.preacts[i - 1] > 0)
    return dws[::-1], dbs[::-1]


def sgd_step(m: MlpModel, grads, lr: float) -> MlpModel:
    """Plain SGD update; returns a new model."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    dws, dbs = grads
    for i, (dw, db) in enumerate(zip(dws, dbs)):
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise FloatingPointError(f"non-finite gradient in layer {i + 1}")
    weights = tuple(w - lr * dw for w, dw in zip(m.weights, dws))
    biases = tuple(b - lr * db for b, db in zip(m.biases, dbs))
    return MlpModel(m.dims, weights, biases, m.norm_mean, m.norm_std)


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LossSpec:
    kind: str = "maxmin"
    alpha: float = 1.0
    mu: float | tuple = 5.0
    gamma_w: float | tuple = 1.0
    clamp_eps: float = 1e-9
    numerator: float = 0.3

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; choose from {LOSS_KINDS}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if np.any(np.asarray(self.mu) <= 0) or np.any(np.asarray(self.gamma_w) <= 0):
            raise ValueError("mu and gamma_w must be positive")
        if self.clamp_eps <= 0:
            raise ValueError("clamp_eps must be positive")

    def to_dict(self) -> dict:
        def plain(v):
            return list(v) if isinstance(v, (tuple, list, np.ndarray)) else v
        return {"kind": self.kind, "alpha": self.alpha, "mu": plain(self.mu),
                "gamma_w": plain(self.gamma_w), "clamp_eps": self.clamp_eps, "numerator": self.numerator}

    @classmethod
    def from_dict(cls, doc: dict) -> "LossSpec":
        doc = dict(doc)
        for key in ("mu", "gamma_w"):
            if isinstance(doc.get(key), list):
                doc[key] = tuple(doc[key])
        return cls(**doc)


def _check_sinr(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("SINR values must be non-negative")
    return s


def _argmin_mask(s: np.ndarray) -> np.ndarray:
    # np.argmin returns the first index on ties
    idx = np.argmin(s, axis=-1)
    return np.arange(s.shape[-1]) == np.expand_dims(idx, -1)


def loss_value(spec: LossSpec, sinr_values):
    """Loss of one sample (1-D input) or per-sample losses (2-D input)."""
    s = _check_sinr(sinr_values)
    if spec.kind in ("maxmin", "maxmin_prior"):
        value = -spec.alpha * s.min(axis=-1)
        if spec.kind == "maxmin":
            with np.errstate(divide="ignore"):
                value = value + _sigmoid(spec.numerator / s).sum(axis=-1)
        return value
    rate = np.log2(1.0 + s)
    if spec.kind == "sum_rate":
        return -(rate / np.asarray(spec.mu)).sum(axis=-1)
    return -(np.asarray(spec.gamma_w) * np.log2(np.maximum(rate, spec.clamp_eps))).sum(axis=-1)


def loss_grad_wrt_sinr(spec: LossSpec, sinr_values) -> np.ndarray:
    s = _check_sinr(sinr_values)
    if spec.kind in ("maxmin", "maxmin_prior"):
        g = -spec.alpha * _argmin_mask(s)
        if spec.kind == "maxmin":
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                x = spec.numerator / s
                term = _sigmoid(x) * _sigmoid(-x) * (-spec.numerator / s ** 2)
            # the sigmoid saturates long before 0.3/s^2 overflows
            g = g + np.where(x < 700.0, term, 0.0)
        return g
    rate = np.log2(1.0 + s)
    drate = 1.0 / ((1.0 + s) * LN2)
    if spec.kind == "sum_rate":
        return -drate / np.asarray(spec.mu)
    active = rate > spec.clamp_eps
    with np.errstate(divide="ignore", invalid="ignore"):
        g = -np.asarray(spec.gamma_w) * drate / (LN2 * rate)
    return np.where(active, g, 0.0)


def loss_grad_wrt_eta(spec: LossSpec, c: SinrCoefficients, p) -> np.ndarray:
    """dLoss/deta through the closed-form SINR (the min term uses the argmin user only)."""
    eta = p.eta if hasattr(p, "eta") else np.asarray(p, dtype=float)
    return sinr_vjp(c, eta, loss_grad_wrt_sinr(spec, sinr(c, eta)))


def batch_loss_and_grads(m: MlpModel, spec: LossSpec, B, c: SinrCoefficients):
    """Per-sample losses of a batch and the parameter gradients of their mean."""
    eta, cache = forward(m, B)
    if not np.all(np.isfinite(eta)):
        raise FloatingPointError("non-finite network output")
    s = sinr(c, eta)
    losses = loss_value(spec, s)
    n = eta.shape[0] if eta.ndim == 2 else 1
    deta = sinr_vjp(c, eta, loss_grad_wrt_sinr(spec, s)) / n
    return np.atleast_1d(losses), backward(m, cache, deta)
