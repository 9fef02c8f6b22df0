"""Interpolant schedules and noisy bridge draws between two point clouds.

The path is x_t = (1-t) x0 + t x1 + gamma(t) z with z standard normal.
gamma vanishes at both endpoints for every schedule kind, so the draw
preserves the endpoint marginals. The velocity regression target is the
pathwise time derivative x1 - x0 + gamma_dot(t) z; the noise head
regresses z itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAMMA_KINDS = ("none", "square_root", "sin_squared", "quadratic")

# t is clamped away from {0,1} when training with the square_root kind,
# whose gamma_dot diverges at the endpoints.
TRAIN_T_MARGIN = 1e-3


class ScheduleSingularityError(ValueError):
    """gamma_dot evaluated where the schedule derivative diverges."""


@dataclass(frozen=True)
class InterpolantSchedule:
    """Noise schedule: kind selects the gamma shape, scale its amplitude."""

    kind: str = "none"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in GAMMA_KINDS:
            raise ValueError(f"unknown gamma kind {self.kind!r}; expected one of {GAMMA_KINDS}")
        if not self.scale >= 0.0:
            raise ValueError(f"noise scale must be nonnegative, got {self.scale}")

    @property
    def stochastic(self) -> bool:
        """True when gamma is not identically zero."""
        return self.kind != "none" and self.scale > 0.0


def _check_unit_interval(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [0, 1]")
    return t


def gamma(schedule: InterpolantSchedule, t) -> np.ndarray | float:
    t = _check_unit_interval(t)
    a = schedule.scale
    if schedule.kind == "none":
        out = np.zeros_like(t)
    elif schedule.kind == "square_root":
        out = a * np.sqrt(2.0 * t * (1.0 - t))
    elif schedule.kind == "sin_squared":
        out = a * np.sin(np.pi * t) ** 2
    else:  # quadratic
        out = a * t * (1.0 - t)
    return out if out.ndim else float(out)


def gamma_dot(schedule: InterpolantSchedule, t) -> np.ndarray | float:
    t = _check_unit_interval(t)
    a = schedule.scale
    if schedule.kind == "none":
        out = np.zeros_like(t)
    elif schedule.kind == "square_root":
        if np.any(t <= 0.0) or np.any(t >= 1.0):
            raise ScheduleSingularityError(
                "square_root gamma_dot diverges at t in {0, 1}; "
                "clamp t into [margin, 1 - margin] before evaluating"
            )
        out = a * (1.0 - 2.0 * t) / np.sqrt(2.0 * t * (1.0 - t))
    elif schedule.kind == "sin_squared":
        out = a * np.pi * np.sin(2.0 * np.pi * t)
    else:  # quadratic
        out = a * (1.0 - 2.0 * t)
    return out if out.ndim else float(out)


def variance_profile(schedule: InterpolantSchedule, t) -> np.ndarray | float:
    """alpha^2 + beta^2 + gamma^2, the marginal variance diagnostic."""
    t = _check_unit_interval(t)
    g = gamma(schedule, t)
    out = (1.0 - t) ** 2 + t ** 2 + np.square(g)
    return out if np.ndim(out) else float(out)


@dataclass
class InterpolantDraw:
    """One batch of interpolant points with their regression targets."""

    x_t: np.ndarray         # (batch, d)
    v_target: np.ndarray    # (batch, d)
    eta_target: np.ndarray  # (batch, d), the z that entered x_t
    t: np.ndarray           # (batch,)


def draw_interpolant(
    schedule: InterpolantSchedule,
    x0: np.ndarray,
    x1: np.ndarray,
    t: np.ndarray,
    rng: np.random.Generator,
) -> InterpolantDraw:
    """Sample x_t and targets for each row; one fresh z per row.

    For the square_root kind the caller must keep t away from the
    endpoints (see TRAIN_T_MARGIN); endpoint evaluation raises.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise ValueError(f"x0 shape {x0.shape} != x1 shape {x1.shape}")
    t = _check_unit_interval(t)
    if t.shape != (x0.shape[0],):
        raise ValueError(f"expected t of shape ({x0.shape[0]},), got {t.shape}")
    z = rng.standard_normal(x0.shape)
    g = np.asarray(gamma(schedule, t))
    g_dot = np.asarray(gamma_dot(schedule, t))
    tc = t[:, None]
    x_t = (1.0 - tc) * x0 + tc * x1 + g[:, None] * z
    v_target = x1 - x0 + g_dot[:, None] * z
    return InterpolantDraw(x_t=x_t, v_target=v_target, eta_target=z, t=t)
