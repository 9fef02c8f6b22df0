"""ODE/SDE integration of the learned flow plus inference-time source noising.

Solvers run on a uniform grid over [0, 1]. The SDE drift follows the
learned velocity minus 0.5 * sigma_t^2 / gamma_t * eta, with diffusion
sigma_t^2 / 2 = c * sin^2(pi t) forced to zero within a small margin of
the endpoints where 1/gamma_t blows up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .interpolant import InterpolantSchedule, gamma
from .net import VelocityScoreModel, forward

SOLVERS = ("euler", "heun", "euler_maruyama")

FieldFn = Callable[[np.ndarray, float], np.ndarray]


class IntegrationError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class SamplerConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    solver: str = "heun"
    steps: int = 50
    source_noise: float = 0.0          # inference-time epsilon
    diffusion_coef: float = 1.0        # c in sigma_t^2 / 2 = c sin^2(pi t)
    margin: float = 1e-3               # sigma forced to 0 within margin of {0,1}
    schedule: InterpolantSchedule = field(default_factory=InterpolantSchedule)
    seed: int = 0

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise SamplerConfigError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.steps < 1:
            raise SamplerConfigError(f"steps must be >= 1, got {self.steps}")
        if not 0.0 <= self.margin < 0.1:
            raise SamplerConfigError(f"margin must be in [0, 0.1), got {self.margin}")
        if self.source_noise < 0:
            raise SamplerConfigError("source_noise must be nonnegative")
        if self.diffusion_coef < 0:
            raise SamplerConfigError("diffusion_coef must be nonnegative")


def default_inference_noise(source_noise_trained: bool, train_scale: float = 1.0) -> float:
    """Source-noise-trained models default to their training jitter scale;
    deterministic models are sampled clean (noised starts are OOD for them)."""
    return train_scale if source_noise_trained else 0.0


@dataclass
class Trajectory:
    times: np.ndarray        # (steps + 1,)
    states: np.ndarray       # (steps + 1, batch, d)


def perturb_source(x0: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """x0 + eps * z with fresh standard-normal z."""
    x0 = np.asarray(x0, dtype=np.float64)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return x0.copy()
    return x0 + eps * rng.standard_normal(x0.shape)


def sigma(cfg: SamplerConfig, t: float) -> float:
    """Diffusion coefficient sqrt(2 c) |sin(pi t)|, zero inside the margin."""
    if t < cfg.margin or t > 1.0 - cfg.margin:
        return 0.0
    return float(np.sqrt(2.0 * cfg.diffusion_coef) * abs(np.sin(np.pi * t)))


def _check_state(x: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(x)):
        raise IntegrationError(step, "non-finite state")


def integrate_ode(
    velocity_fn: FieldFn,
    x_start: np.ndarray,
    cfg: SamplerConfig,
    record: bool = False,
) -> np.ndarray | tuple[np.ndarray, Trajectory]:
    """Euler (1 eval/step) or Heun (2 evals/step) over the uniform grid."""
    if cfg.solver not in ("euler", "heun"):
        raise SamplerConfigError(f"integrate_ode cannot run solver {cfg.solver!r}")
    x = np.asarray(x_start, dtype=np.float64).copy()
    dt = 1.0 / cfg.steps
    states = [x.copy()] if record else None
    for k in range(cfg.steps):
        t0 = k * dt
        v0 = velocity_fn(x, t0)
        if cfg.solver == "euler":
            x = x + dt * v0
        else:
            x_pred = x + dt * v0
            v1 = velocity_fn(x_pred, t0 + dt)
            x = x + 0.5 * dt * (v0 + v1)
        _check_state(x, k)
        if record:
            states.append(x.copy())
    if record:
        times = np.linspace(0.0, 1.0, cfg.steps + 1)
        return x, Trajectory(times=times, states=np.stack(states))
    return x


def integrate_sde(
    velocity_fn: FieldFn,
    score_fn: FieldFn,
    x_start: np.ndarray,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    record: bool = False,
) -> np.ndarray | tuple[np.ndarray, Trajectory]:
    """Euler-Maruyama with the score-corrected drift.

    With diffusion_coef == 0 this reduces bitwise to the Euler ODE on the
    same grid (no noise is drawn where sigma vanishes).
    """
    if not cfg.schedule.stochastic:
        raise SamplerConfigError(
            "SDE sampling needs a stochastic interpolant schedule; "
            "gamma is identically zero so the score term is undefined"
        )
    x = np.asarray(x_start, dtype=np.float64).copy()
    dt = 1.0 / cfg.steps
    states = [x.copy()] if record else None
    for k in range(cfg.steps):
        t0 = k * dt
        drift = velocity_fn(x, t0)
        sig = sigma(cfg, t0)
        if sig > 0.0:
            g = gamma(cfg.schedule, t0)
            drift = drift - (0.5 * sig * sig / g) * score_fn(x, t0)
            x = x + dt * drift + sig * np.sqrt(dt) * rng.standard_normal(x.shape)
        else:
            x = x + dt * drift
        _check_state(x, k)
        if record:
            states.append(x.copy())
    if record:
        times = np.linspace(0.0, 1.0, cfg.steps + 1)
        return x, Trajectory(times=times, states=np.stack(states))
    return x


def model_fields(model: VelocityScoreModel) -> tuple[FieldFn, FieldFn]:
    """Wrap the two heads as (x, t) -> batch field evaluations."""

    def velocity(x: np.ndarray, t: float) -> np.ndarray:
        return forward(model, x, np.full(len(x), t))[0]

    def score(x: np.ndarray, t: float) -> np.ndarray:
        return forward(model, x, np.full(len(x), t))[1]

    return velocity, score


def generate(
    model: VelocityScoreModel,
    source_batch: np.ndarray,
    cfg: SamplerConfig,
    record: bool = False,
) -> np.ndarray | tuple[np.ndarray, Trajectory]:
    """Noise the sources with cfg.source_noise, then integrate to t=1.

    Deterministic given cfg.seed, including the SDE path and eps > 0.
    """
    source_batch = np.asarray(source_batch, dtype=np.float64)
    if source_batch.ndim != 2 or source_batch.shape[1] != model.dim:
        raise ValueError(
            f"source batch shape {source_batch.shape} does not match model dim {model.dim}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    x0 = perturb_source(source_batch, cfg.source_noise, rng)
    velocity_fn, score_fn = model_fields(model)
    if cfg.solver == "euler_maruyama":
        return integrate_sde(velocity_fn, score_fn, x0, cfg, rng, record=record)
    return integrate_ode(velocity_fn, x0, cfg, record=record)
