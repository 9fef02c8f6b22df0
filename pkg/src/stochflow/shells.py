"""ConcentricShells synthetic task: radius-1 source shell, radius-2 target shell.

Each sample is radius * (g / ||g||) + noise, with g standard normal (so
directions are exactly uniform on the sphere in any dimension) and
Gaussian coordinate noise of standard deviation noise_std.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SOURCE_RADIUS = 1.0
TARGET_RADIUS = 2.0
SHELL_NOISE_STD = 0.1
DEFAULT_TEST_N = 512


@dataclass(frozen=True)
class ShellConfig:
    dim: int
    radius: float
    n: int
    noise_std: float = SHELL_NOISE_STD
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")


@dataclass(frozen=True)
class SweepConfig:
    """One stress-test axis: dims or training-set sizes, with replicate seeds."""

    axis: str                     # "dim" or "n_train"
    values: tuple[int, ...]
    fixed_dim: int = 512          # used when axis == "n_train"
    fixed_n_train: int = 1024     # used when axis == "dim"
    seeds: tuple[int, ...] = (0,)
    test_n: int = DEFAULT_TEST_N

    def __post_init__(self):
        if self.axis not in ("dim", "n_train"):
            raise ValueError(f"axis must be 'dim' or 'n_train', got {self.axis!r}")
        if not self.values or any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("axis values must be nonempty and strictly increasing")
        if not self.seeds:
            raise ValueError("need at least one seed")

    def points(self) -> list[tuple[int, int]]:
        """(dim, n_train) pairs along the axis."""
        if self.axis == "dim":
            return [(v, self.fixed_n_train) for v in self.values]
        return [(self.fixed_dim, v) for v in self.values]


def sample_shell(cfg: ShellConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw cfg.n points on the noisy shell; deterministic given (cfg, seed)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    g = rng.standard_normal((cfg.n, cfg.dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    noise = cfg.noise_std * rng.standard_normal((cfg.n, cfg.dim))
    return cfg.radius * g + noise


@dataclass(frozen=True)
class Task:
    source_train: np.ndarray
    target_train: np.ndarray
    source_test: np.ndarray
    target_test: np.ndarray

    @property
    def dim(self) -> int:
        return self.source_train.shape[1]


def make_task(train_n: int, dim: int, seed: int, test_n: int = DEFAULT_TEST_N) -> Task:
    """Fresh draws for all four splits from disjoint RNG streams."""
    streams = np.random.SeedSequence(seed).spawn(4)
    rngs = [np.random.default_rng(s) for s in streams]
    return Task(
        source_train=sample_shell(ShellConfig(dim=dim, radius=SOURCE_RADIUS, n=train_n), rngs[0]),
        target_train=sample_shell(ShellConfig(dim=dim, radius=TARGET_RADIUS, n=train_n), rngs[1]),
        source_test=sample_shell(ShellConfig(dim=dim, radius=SOURCE_RADIUS, n=test_n), rngs[2]),
        target_test=sample_shell(ShellConfig(dim=dim, radius=TARGET_RADIUS, n=test_n), rngs[3]),
    )


def write_points_csv(path: str | Path, points: np.ndarray) -> None:
    points = np.asarray(points)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j}" for j in range(points.shape[1])])
        writer.writerows(points.tolist())


def read_points_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in row] for row in rows[1:]])
