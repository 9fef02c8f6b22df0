"""Evaluation metrics: cosine alignment, entropic OT, MSE, assignment match.

Sinkhorn iterations run in the log domain on per-coordinate costs
(squared distances divided by d) so that one regularization value works
across dimensions; the returned transport cost is rescaled back to the
raw squared-Euclidean scale. Evaluation reports divide by d again, so
CSV values are per-coordinate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .assignment import min_cost_assignment


class MetricError(ValueError):
    pass


def _paired(sources: np.ndarray, generated: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(sources, dtype=np.float64)
    b = np.asarray(generated, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise MetricError(f"paired metrics need equal 2-D shapes, got {a.shape} vs {b.shape}")
    return a, b


def mean_cosine(sources: np.ndarray, generated: np.ndarray) -> float:
    """Mean over rows of cos(source_i, generated_i)."""
    a, b = _paired(sources, generated)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    for name, norms in (("sources", na), ("generated", nb)):
        zeros = np.flatnonzero(norms == 0.0)
        if zeros.size:
            raise MetricError(f"zero-norm row {zeros[0]} in {name}")
    return float(np.mean(np.sum(a * b, axis=1) / (na * nb)))


def mean_mse(sources: np.ndarray, generated: np.ndarray) -> float:
    """Mean squared difference over rows and coordinates."""
    a, b = _paired(sources, generated)
    return float(np.mean((a - b) ** 2))


def _logsumexp(m: np.ndarray, axis: int) -> np.ndarray:
    mx = np.max(m, axis=axis, keepdims=True)
    out = mx + np.log(np.sum(np.exp(m - mx), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


@dataclass(frozen=True)
class SinkhornResult:
    cost: float          # transport cost <P, C> on the raw squared-Euclidean C
    converged: bool
    iterations: int


def sinkhorn_plan(C: np.ndarray, reg: float, max_iter: int = 10000,
                  tol: float = 1e-8) -> tuple[np.ndarray, bool, int]:
    """Log-domain Sinkhorn with uniform marginals on a given cost matrix.

    Stops when the L1 marginal violation drops below tol. Returns the
    transport plan, a convergence flag, and the iteration count.
    """
    if reg <= 0:
        raise MetricError(f"reg must be positive, got {reg}")
    n, m = C.shape
    log_a = -np.log(n)
    log_b = -np.log(m)
    f = np.zeros(n)
    g = np.zeros(m)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f = -reg * (_logsumexp((g[None, :] - C) / reg, axis=1) + log_b)
        g = -reg * (_logsumexp((f[:, None] - C) / reg, axis=0) + log_a)
        P = np.exp((f[:, None] + g[None, :] - C) / reg + log_a + log_b)
        violation = np.abs(P.sum(axis=1) - 1.0 / n).sum() + np.abs(P.sum(axis=0) - 1.0 / m).sum()
        if violation < tol:
            converged = True
            break
    P = np.exp((f[:, None] + g[None, :] - C) / reg + log_a + log_b)
    return P, converged, it


def sinkhorn_distance(A: np.ndarray, B: np.ndarray, reg: float = 0.1,
                      max_iter: int = 10000, tol: float = 1e-8) -> SinkhornResult:
    """Entropic OT cost between point clouds under squared-Euclidean cost.

    reg acts on per-coordinate costs; the returned cost is on the raw
    (unnormalized) squared-Euclidean scale. The cost is symmetric, so the
    arguments are put in a canonical order first; both call orders then
    run the identical iteration and return the identical value.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise MetricError(f"dimension mismatch: {A.shape} vs {B.shape}")
    if (B.shape[0], B.tobytes()) < (A.shape[0], A.tobytes()):
        A, B = B, A
    d = A.shape[1]
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    P, converged, it = sinkhorn_plan(sq / d, reg, max_iter=max_iter, tol=tol)
    if not converged:
        warnings.warn(f"sinkhorn did not converge in {it} iterations", RuntimeWarning)
    return SinkhornResult(cost=float((P * sq).sum()), converged=converged, iterations=it)


def match_fraction(sources: np.ndarray, generated: np.ndarray, max_n: int = 2048) -> float:
    """Fraction of sources assigned to their own generated sample under the
    exact minimum-total-Euclidean-distance assignment."""
    a, b = _paired(sources, generated)
    n = a.shape[0]
    if n > max_n:
        raise MetricError(f"assignment capped at {max_n} points, got {n}")
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    assign, _ = min_cost_assignment(np.sqrt(sq))
    return float(np.mean(assign == np.arange(n)))


def wasserstein1_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Exact W1 between two equal-size 1-D samples (sorted pairing)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise MetricError(f"equal sample sizes required, got {a.size} vs {b.size}")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


@dataclass(frozen=True)
class SmoothingCheck:
    raw: float
    smoothed: float


def wasserstein_smoothing_check(
    A: np.ndarray,
    B: np.ndarray,
    noise_std: float,
    rng: np.random.Generator,
    redraws: int = 100,
    reg: float = 0.01,
) -> SmoothingCheck:
    """Compare W1(A, B) against W1 of their Gaussian-smoothed versions.

    The smoothed measure is the empirical convolution: each point is
    replicated across `redraws` independent noise draws and the pooled
    clouds are compared. 1-D inputs use the exact sorted W1; 2-D inputs
    fall back to an entropic approximation with Euclidean cost and
    regularization reg.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if noise_std < 0:
        raise MetricError("noise_std must be nonnegative")
    if A.ndim <= 1:
        w1 = wasserstein1_1d
        A = A.ravel()[:, None]
        B = B.ravel()[:, None]
    else:
        def w1(x, y):
            sq = (
                np.sum(x * x, axis=1)[:, None]
                + np.sum(y * y, axis=1)[None, :]
                - 2.0 * (x @ y.T)
            )
            np.maximum(sq, 0.0, out=sq)
            P, _, _ = sinkhorn_plan(np.sqrt(sq), reg)
            return float((P * np.sqrt(sq)).sum())

    raw = w1(A, B)
    za = noise_std * rng.standard_normal((redraws,) + A.shape)
    zb = noise_std * rng.standard_normal((redraws,) + B.shape)
    pooled_a = (A[None] + za).reshape(-1, A.shape[1])
    pooled_b = (B[None] + zb).reshape(-1, B.shape[1])
    smoothed = w1(pooled_a, pooled_b)
    return SmoothingCheck(raw=raw, smoothed=smoothed)


@dataclass(frozen=True)
class MetricsReport:
    mean_cosine: float
    sinkhorn: float        # per-coordinate transport cost
    mse: float
    match_fraction: float
    n_eval: int


def evaluate(sources: np.ndarray, generated: np.ndarray, targets: np.ndarray,
             reg: float = 0.1) -> MetricsReport:
    """Full report: paired metrics vs sources, Sinkhorn vs the target cloud."""
    d = np.asarray(sources).shape[1]
    sk = sinkhorn_distance(generated, targets, reg=reg)
    return MetricsReport(
        mean_cosine=mean_cosine(sources, generated),
        sinkhorn=sk.cost / d,
        mse=mean_mse(sources, generated),
        match_fraction=match_fraction(sources, generated),
        n_eval=len(sources),
    )
