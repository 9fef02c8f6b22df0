"""Adam optimizer and exponential-moving-average weight tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(params: dict[str, np.ndarray], lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        m={k: np.zeros_like(a) for k, a in params.items()},
        v={k: np.zeros_like(a) for k, a in params.items()},
    )


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Bias-corrected Adam update, in place; returns params."""
    if set(grads) != set(params):
        raise ValueError("gradient keys do not match parameter keys")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {k!r}")
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        m_hat = state.m[k] / c1
        v_hat = state.v[k] / c2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


@dataclass
class EmaState:
    """Shadow copy of parameters, updated as decay*shadow + (1-decay)*params."""

    decay: float
    shadow: dict[str, np.ndarray]

    def __post_init__(self):
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f"ema decay must be in (0, 1), got {self.decay}")


def ema_init(params: dict[str, np.ndarray], decay: float = 0.999) -> EmaState:
    return EmaState(decay=decay, shadow={k: a.copy() for k, a in params.items()})


def ema_update(state: EmaState, params: dict[str, np.ndarray]) -> EmaState:
    d = state.decay
    for k, p in params.items():
        if state.shadow[k].shape != p.shape:
            raise ValueError(f"ema shape mismatch for {k!r}")
        state.shadow[k] = d * state.shadow[k] + (1.0 - d) * p
    return state
