"""Fully connected network with a softmax or a single-unit regression head.

Everything runs in float64. Parameters are stored per layer as ``(out, in)``
weight matrices and ``(out,)`` bias vectors, so a batch ``X`` of shape
``(m, in)`` maps to ``X @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from credit_mlp.errors import ConfigError, NumericError

HEADS = ("classification", "regression")
ACTIVATIONS = ("relu", "tanh")
CROSS_ENTROPY = "sparse_categorical_crossentropy"
MSE = "mean_squared_error"
PROB_FLOOR = 1e-15


@dataclass(frozen=True)
class MLPConfig:
    input_dim: int = 43
    hidden_layers: int = 3
    hidden_width: int = 50
    head: str = "classification"
    n_classes: int = 6
    activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_layers < 1 or self.hidden_width < 1:
            raise ConfigError("input_dim, hidden_layers and hidden_width must all be >= 1")
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.head == "classification" and self.n_classes < 2:
            raise ConfigError("classification head needs at least 2 classes")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def output_dim(self) -> int:
        return self.n_classes if self.head == "classification" else 1

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *[self.hidden_width] * self.hidden_layers, self.output_dim]

    @property
    def loss_kind(self) -> str:
        return CROSS_ENTROPY if self.head == "classification" else MSE

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "head": self.head,
            "n_classes": self.n_classes,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLPConfig":
        return cls(**d)


@dataclass
class MLPParams:
    """Layer weights and biases; gradients reuse this shape."""

    config: MLPConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = self.config.layer_dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ConfigError("parameter layer count does not match config")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ConfigError(f"layer {i} has shapes {W.shape}/{b.shape}, expected {(dims[i + 1], dims[i])}")

    @property
    def shapes(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        return [(W.shape, b.shape) for W, b in zip(self.weights, self.biases)]

    def arrays(self) -> Iterator[np.ndarray]:
        for W, b in zip(self.weights, self.biases):
            yield W
            yield b

    def copy(self) -> "MLPParams":
        return MLPParams(self.config, [W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "MLPParams":
        return MLPParams(self.config, [np.zeros_like(W) for W in self.weights], [np.zeros_like(b) for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vector: np.ndarray) -> "MLPParams":
        out, pos = self.zeros_like(), 0
        for a in out.arrays():
            a.ravel()[:] = vector[pos : pos + a.size]
            pos += a.size
        return out

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def to_dict(self) -> dict:
        return {
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, config: MLPConfig, d: dict) -> "MLPParams":
        return cls(
            config,
            [np.asarray(W, dtype=np.float64).reshape(o, i) for W, (i, o) in zip(d["weights"], _pairs(config))],
            [np.asarray(b, dtype=np.float64).reshape(o) for b, (_, o) in zip(d["biases"], _pairs(config))],
        )


def _pairs(config: MLPConfig) -> list[tuple[int, int]]:
    dims = config.layer_dims
    return list(zip(dims[:-1], dims[1:]))


def init_params(config: MLPConfig, seed: int = 0) -> MLPParams:
    """Zero-mean Gaussian weights scaled by fan-in, zero biases.

    He scaling (variance 2/fan_in) for ReLU, LeCun (1/fan_in) for tanh.
    """
    rng = np.random.default_rng(seed)
    gain = 2.0 if config.activation == "relu" else 1.0
    weights, biases = [], []
    for fan_in, fan_out in _pairs(config):
        weights.append(rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(config, weights, biases)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    """In place; ``z`` is not needed afterwards."""
    return np.maximum(z, 0.0, out=z) if name == "relu" else np.tanh(z, out=z)


def _backprop_activation(name: str, delta: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Multiply ``delta`` in place by the activation derivative, written via the output ``a``."""
    if name == "relu":
        delta[a <= 0] = 0.0
    else:
        delta *= 1.0 - a * a
    return delta


def _as_batch(params: MLPParams, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = X.reshape(1, -1) if single else X
    if X.ndim != 2 or X.shape[1] != params.config.input_dim:
        raise ConfigError(f"expected inputs of length {params.config.input_dim}, got shape {np.shape(x)}")
    if not np.all(np.isfinite(X)):
        raise NumericError("forward pass input contains non-finite values")
    return X, single


def _forward_layers(params: MLPParams, X: np.ndarray) -> list[np.ndarray]:
    """Input followed by each layer's activation; the last entry is the raw head output."""
    name = params.config.activation
    post = [X]
    last = len(params.weights) - 1
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (W, b) in enumerate(zip(params.weights, params.biases)):
            z = post[-1] @ W.T
            z += b
            post.append(z if i == last else _activate(name, z))
    if not np.isfinite(post[-1]).all():
        bad = next(i for i, a in enumerate(post[1:]) if not np.isfinite(a).all())
        raise NumericError(f"non-finite pre-activation in layer {bad}")
    return post


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def logits(params: MLPParams, x) -> np.ndarray:
    X, single = _as_batch(params, x)
    out = _forward_layers(params, X)[-1]
    return out[0] if single else out


def forward(params: MLPParams, x) -> np.ndarray | float:
    """Class probabilities (classification) or raw score (regression).

    ``x`` may be one feature vector or an ``(m, input_dim)`` batch.
    """
    X, single = _as_batch(params, x)
    out = _forward_layers(params, X)[-1]
    if params.config.head == "classification":
        out = softmax(out)
        return out[0] if single else out
    out = out[:, 0]
    return float(out[0]) if single else out


def loss(output, target, kind: str) -> float | np.ndarray:
    """Per-sample loss: ``-ln p[target]`` (p floored at 1e-15) or ``(output - target)**2``."""
    if kind == CROSS_ENTROPY:
        p = np.asarray(output, dtype=np.float64)
        t = np.asarray(target)
        n_classes = p.shape[-1]
        if np.any(t != np.round(t)) or np.any(t < 0) or np.any(t >= n_classes):
            raise ConfigError(f"class target {target} outside 0..{n_classes - 1}")
        t = t.astype(np.int64)
        picked = p[t] if p.ndim == 1 else p[np.arange(len(p)), t]
        value = -np.log(np.maximum(picked, PROB_FLOOR))
    elif kind == MSE:
        t = np.asarray(target, dtype=np.float64)
        if not np.all(np.isfinite(t)):
            raise ConfigError("regression target must be finite")
        value = (np.asarray(output, dtype=np.float64) - t) ** 2
    else:
        raise ConfigError(f"unknown loss kind {kind!r}")
    value = np.maximum(value, 0.0)  # -log(1.0) yields -0.0
    return float(value) if np.ndim(value) == 0 else value


def _check_kind(params: MLPParams, kind: str | None) -> str:
    expected = params.config.loss_kind
    if kind is not None and kind != expected:
        raise ConfigError(f"{params.config.head} head pairs with {expected}, not {kind}")
    return expected


def mean_loss(params: MLPParams, X, targets, kind: str | None = None) -> float:
    kind = _check_kind(params, kind)
    return float(np.mean(loss(forward(params, X), targets, kind)))


def backward(params: MLPParams, X, targets, kind: str | None = None) -> tuple[MLPParams, float]:
    """Gradient of the mean batch loss w.r.t. every weight and bias.

    Cross-entropy is taken from log-sum-exp of the logits, so no probability
    floor enters the gradient path.
    """
    kind = _check_kind(params, kind)
    X, _ = _as_batch(params, X)
    m = X.shape[0]
    if m == 0:
        raise ConfigError("backward needs a non-empty batch")
    t = np.asarray(targets)
    post = _forward_layers(params, X)
    out = post[-1]
    if kind == CROSS_ENTROPY:
        t = t.astype(np.int64)
        if np.any(t < 0) or np.any(t >= out.shape[1]):
            raise ConfigError(f"class targets must lie in 0..{out.shape[1] - 1}")
        shifted = out - out.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1))
        batch_loss = float(np.mean(lse - shifted[np.arange(m), t]))
        delta = softmax(out)
        delta[np.arange(m), t] -= 1.0
        delta /= m
    else:
        resid = out[:, 0] - t.astype(np.float64)
        batch_loss = float(np.mean(resid**2))
        delta = (2.0 / m) * resid[:, None]

    name = params.config.activation
    grads = params.zeros_like()
    for i in range(len(params.weights) - 1, -1, -1):
        grads.weights[i] = delta.T @ post[i]
        grads.biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = _backprop_activation(name, delta @ params.weights[i], post[i])
    for i, (gW, gb) in enumerate(zip(grads.weights, grads.biases)):
        if not (np.isfinite(gW).all() and np.isfinite(gb).all()):
            raise NumericError(f"non-finite gradient in layer {i}")
    if not np.isfinite(batch_loss):
        raise NumericError("non-finite batch loss")
    return grads, batch_loss


def finite_difference_grad(params: MLPParams, X, targets, kind: str | None = None, h: float = 1e-5) -> MLPParams:
    """Central-difference gradient of :func:`mean_loss`; a test oracle, O(#params) passes."""
    if not h > 0:
        raise ConfigError(f"finite-difference step must be positive, got {h}")
    work = params.copy()
    grads = params.zeros_like()
    for a, g in zip(work.arrays(), grads.arrays()):
        flat_a, flat_g = a.reshape(-1), g.reshape(-1)
        for j in range(flat_a.size):
            saved = flat_a[j]
            flat_a[j] = saved + h
            up = mean_loss(work, X, targets, kind)
            flat_a[j] = saved - h
            down = mean_loss(work, X, targets, kind)
            flat_a[j] = saved
            flat_g[j] = (up - down) / (2.0 * h)
    return grads


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"  # or "gd"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("adam", "gd"):
            raise ConfigError(f"optimizer must be 'adam' or 'gd', got {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def optimizer_step(
    params: MLPParams, grads: MLPParams, state: AdamState | None, hyper: OptimizerConfig
) -> tuple[MLPParams, AdamState]:
    """One update. Returns new parameters; inputs are not modified."""
    if params.shapes != grads.shapes:
        raise ConfigError("gradient shapes do not match parameters")
    state = state if state is not None else AdamState()
    p_arrays, g_arrays = list(params.arrays()), list(grads.arrays())
    with np.errstate(over="ignore", invalid="ignore"):
        new, state = _update(p_arrays, g_arrays, state, hyper)
    if not all(np.all(np.isfinite(a)) for a in new):
        raise NumericError("optimizer produced non-finite parameters")
    return MLPParams(params.config, new[0::2], new[1::2]), state


def _update(p_arrays, g_arrays, state: AdamState, hyper: OptimizerConfig):
    if hyper.kind == "gd":
        new = [p - hyper.learning_rate * g for p, g in zip(p_arrays, g_arrays)]
        state = AdamState(state.step + 1, state.m, state.v)
    else:
        if not state.m:
            state = AdamState(0, [np.zeros_like(p) for p in p_arrays], [np.zeros_like(p) for p in p_arrays])
        t = state.step + 1
        m = [hyper.beta1 * mi + (1 - hyper.beta1) * g for mi, g in zip(state.m, g_arrays)]
        v = [hyper.beta2 * vi + (1 - hyper.beta2) * g * g for vi, g in zip(state.v, g_arrays)]
        c1, c2 = 1 - hyper.beta1**t, 1 - hyper.beta2**t
        new = [
            p - hyper.learning_rate * (mi / c1) / (np.sqrt(vi / c2) + hyper.epsilon)
            for p, mi, vi in zip(p_arrays, m, v)
        ]
        state = AdamState(t, m, v)
    return new, state
