"""Two-head MLP (velocity + score) with hand-rolled reverse-mode gradients.

The network is a 4-layer fully connected trunk with ELU activations,
followed by two linear heads of output width d: one for the velocity
field and one for the noise-prediction (score surrogate) field. Time
enters as a fixed Fourier embedding concatenated to the state vector.
Everything is float64 numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TIME_FREQS = (1.0, 2.0, 4.0, 8.0)
N_TIME_FEATURES = 2 * len(TIME_FREQS) + 1

N_TRUNK_LAYERS = 4
DEFAULT_HIDDEN = 64

# Fixed parameter order; checkpointing and optimizers rely on it.
PARAM_KEYS = tuple(
    [f"{p}{i}" for i in range(1, N_TRUNK_LAYERS + 1) for p in ("w", "b")]
    + ["w_v", "b_v", "w_eta", "b_eta"]
)


class ShapeError(ValueError):
    """Input dimensions do not match the model."""


def time_features(t: np.ndarray) -> np.ndarray:
    """Embed times in [0,1] as [t, sin/cos(2*pi*k*t) for k in TIME_FREQS]."""
    t = np.asarray(t, dtype=np.float64)
    cols = [t]
    for k in TIME_FREQS:
        cols.append(np.sin(2.0 * np.pi * k * t))
        cols.append(np.cos(2.0 * np.pi * k * t))
    return np.stack(cols, axis=-1)


@dataclass
class VelocityScoreModel:
    """Parameter container for the shared-trunk, two-head MLP."""

    dim: int
    hidden: int = DEFAULT_HIDDEN
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for key in PARAM_KEYS:
            if key not in self.params:
                raise ValueError(f"missing parameter array {key!r}")
            if not np.all(np.isfinite(self.params[key])):
                raise ValueError(f"non-finite values in parameter {key!r}")
        if self.params["w_v"].shape != (self.hidden, self.dim):
            raise ShapeError(
                f"velocity head shape {self.params['w_v'].shape} does not "
                f"match (hidden={self.hidden}, dim={self.dim})"
            )

    @property
    def input_width(self) -> int:
        return self.dim + N_TIME_FEATURES

    def copy(self) -> "VelocityScoreModel":
        return VelocityScoreModel(
            dim=self.dim,
            hidden=self.hidden,
            params={k: v.copy() for k, v in self.params.items()},
        )


def layer_sizes(dim: int, hidden: int) -> list[int]:
    return [dim + N_TIME_FEATURES] + [hidden] * N_TRUNK_LAYERS


def init_model(dim: int, hidden: int = DEFAULT_HIDDEN, rng: np.random.Generator | None = None) -> VelocityScoreModel:
    """Glorot-uniform weights, zero biases."""
    if rng is None:
        rng = np.random.default_rng()
    sizes = layer_sizes(dim, hidden)
    params: dict[str, np.ndarray] = {}
    for i in range(N_TRUNK_LAYERS):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"w{i + 1}"] = rng.uniform(-lim, lim, size=(fan_in, fan_out))
        params[f"b{i + 1}"] = np.zeros(fan_out)
    lim = np.sqrt(6.0 / (hidden + dim))
    for head in ("v", "eta"):
        params[f"w_{head}"] = rng.uniform(-lim, lim, size=(hidden, dim))
        params[f"b_{head}"] = np.zeros(dim)
    return VelocityScoreModel(dim=dim, hidden=hidden, params=params)


def zero_model(dim: int, hidden: int = DEFAULT_HIDDEN) -> VelocityScoreModel:
    """All-zero parameters; forward is the zero map (useful as a fixture)."""
    sizes = layer_sizes(dim, hidden)
    params: dict[str, np.ndarray] = {}
    for i in range(N_TRUNK_LAYERS):
        params[f"w{i + 1}"] = np.zeros((sizes[i], sizes[i + 1]))
        params[f"b{i + 1}"] = np.zeros(sizes[i + 1])
    for head in ("v", "eta"):
        params[f"w_{head}"] = np.zeros((hidden, dim))
        params[f"b_{head}"] = np.zeros(dim)
    return VelocityScoreModel(dim=dim, hidden=hidden, params=params)


def _elu(x: np.ndarray) -> np.ndarray:
    # expm1 on the clipped negative part avoids overflow warnings for x >> 0
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


@dataclass
class ForwardTrace:
    """Intermediates from one forward pass, consumed by backward()."""

    inputs: np.ndarray                 # (batch, dim + N_TIME_FEATURES)
    pre: list[np.ndarray]              # trunk pre-activations
    post: list[np.ndarray]             # trunk post-activations
    v: np.ndarray
    eta: np.ndarray


def _check_inputs(model: VelocityScoreModel, x: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ShapeError(f"expected x of shape (batch, {model.dim}), got {x.shape}")
    if t.shape != (x.shape[0],):
        raise ShapeError(f"expected t of shape ({x.shape[0]},), got {t.shape}")
    return x, t


def forward_trace(model: VelocityScoreModel, x: np.ndarray, t: np.ndarray) -> ForwardTrace:
    x, t = _check_inputs(model, x, t)
    h = np.concatenate([x, time_features(t)], axis=1)
    p = model.params
    pre, post = [], []
    a = h
    for i in range(1, N_TRUNK_LAYERS + 1):
        z = a @ p[f"w{i}"] + p[f"b{i}"]
        a = _elu(z)
        pre.append(z)
        post.append(a)
    v = a @ p["w_v"] + p["b_v"]
    eta = a @ p["w_eta"] + p["b_eta"]
    return ForwardTrace(inputs=h, pre=pre, post=post, v=v, eta=eta)


def forward(model: VelocityScoreModel, x: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate both heads; returns (v, eta), each (batch, dim)."""
    trace = forward_trace(model, x, t)
    return trace.v, trace.eta


def backward(
    model: VelocityScoreModel,
    x: np.ndarray,
    t: np.ndarray,
    grad_v: np.ndarray,
    grad_eta: np.ndarray,
    trace: ForwardTrace | None = None,
) -> dict[str, np.ndarray]:
    """Parameter gradients of sum(grad_v * v) + sum(grad_eta * eta).

    grad_v / grad_eta are the upstream loss gradients w.r.t. the head
    outputs. The trace is recomputed when not supplied.
    """
    if trace is None:
        trace = forward_trace(model, x, t)
    grad_v = np.asarray(grad_v, dtype=np.float64)
    grad_eta = np.asarray(grad_eta, dtype=np.float64)
    if not (np.all(np.isfinite(grad_v)) and np.all(np.isfinite(grad_eta))):
        raise FloatingPointError("non-finite upstream gradient")
    p = model.params
    grads: dict[str, np.ndarray] = {}
    h_last = trace.post[-1]
    grads["w_v"] = h_last.T @ grad_v
    grads["b_v"] = grad_v.sum(axis=0)
    grads["w_eta"] = h_last.T @ grad_eta
    grads["b_eta"] = grad_eta.sum(axis=0)
    da = grad_v @ p["w_v"].T + grad_eta @ p["w_eta"].T
    for i in range(N_TRUNK_LAYERS, 0, -1):
        dz = da * _elu_grad(trace.pre[i - 1])
        a_prev = trace.inputs if i == 1 else trace.post[i - 2]
        grads[f"w{i}"] = a_prev.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        if i > 1:
            da = dz @ p[f"w{i}"].T
    return grads
