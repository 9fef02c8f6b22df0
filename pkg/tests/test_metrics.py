import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochflow.assignment import min_cost_assignment
from stochflow.metrics import (
    MetricError,
    evaluate,
    match_fraction,
    mean_cosine,
    mean_mse,
    sinkhorn_distance,
    wasserstein1_1d,
    wasserstein_smoothing_check,
)


def brute_force_assignment_cost(cost):
    n = len(cost)
    return min(
        sum(cost[i, p[i]] for i in range(n))
        for p in itertools.permutations(range(n))
    )


# ---------------------------------------------------------------- cosine


def test_cosine_scale_invariance_ideal_radial_transport():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 4))
    assert mean_cosine(x, 2.0 * x) == pytest.approx(1.0)


def test_cosine_orthogonal_and_antipodal():
    x = np.array([[1.0, 0.0]])
    assert mean_cosine(x, np.array([[0.0, 1.0]])) == pytest.approx(0.0, abs=1e-15)
    assert mean_cosine(x, -x) == pytest.approx(-1.0)


def test_cosine_zero_norm_row_named():
    x = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(MetricError, match="row 1"):
        mean_cosine(x, np.ones((2, 2)))


@given(st.floats(1e-3, 1e3))
@settings(max_examples=30, deadline=None)
def test_cosine_invariant_under_positive_scaling(lam):
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 3))
    b = rng.standard_normal((6, 3))
    assert mean_cosine(a, lam * b) == pytest.approx(mean_cosine(a, b), rel=1e-9)


# ---------------------------------------------------------------- mse


def test_mse_examples():
    a = np.ones((3, 2))
    assert mean_mse(a, a) == 0.0
    assert mean_mse(a, a + 1.0) == pytest.approx(1.0)
    x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    y = np.array([[0.0, 2.0], [3.0, 1.0], [5.0, 8.0]])
    # hand value: (1 + 0 + 0 + 9 + 0 + 4) / 6
    assert mean_mse(x, y) == pytest.approx(14.0 / 6.0)


# ---------------------------------------------------------------- sinkhorn


def test_sinkhorn_identity_blur_vanishes_with_reg():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-5, 5, size=(32, 2))
    res = sinkhorn_distance(pts, pts, reg=0.01)
    assert res.cost < 0.05


def test_sinkhorn_two_singletons_exact():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 2.0, 2.0]])
    res = sinkhorn_distance(a, b, reg=0.1)
    assert res.cost == pytest.approx(9.0, rel=1e-12)


def test_sinkhorn_translation_sensitivity_on_singletons():
    a = np.array([[1.0, 1.0]])
    b = np.array([[2.0, 0.0]])
    u = np.array([0.5, -1.5])
    res = sinkhorn_distance(a, b + u, reg=0.1)
    assert res.cost == pytest.approx(np.sum((a[0] - b[0] - u) ** 2), rel=1e-12)


def test_sinkhorn_1d_matches_sorted_pairing():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 1))
    b = rng.standard_normal((5, 1))
    exact = np.mean((np.sort(a.ravel()) - np.sort(b.ravel())) ** 2)
    res = sinkhorn_distance(a, b, reg=0.01)
    assert res.cost == pytest.approx(exact * 5 / 5, rel=0.05)


def test_sinkhorn_symmetry():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((12, 3))
    b = rng.standard_normal((17, 3))
    assert sinkhorn_distance(a, b).cost == pytest.approx(sinkhorn_distance(b, a).cost, abs=1e-9)


def test_sinkhorn_non_convergence_flagged():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((10, 2))
    b = rng.standard_normal((10, 2)) + 3.0
    with pytest.warns(RuntimeWarning):
        res = sinkhorn_distance(a, b, reg=0.001, max_iter=2)
    assert not res.converged
    assert np.isfinite(res.cost)


def test_sinkhorn_rejects_bad_reg():
    with pytest.raises(MetricError):
        sinkhorn_distance(np.ones((2, 2)), np.ones((2, 2)), reg=0.0)


# ---------------------------------------------------------------- assignment


def test_match_fraction_diagonal_obvious():
    rng = np.random.default_rng(6)
    src = rng.standard_normal((10, 3))
    gen = src + 1e-6 * rng.standard_normal((10, 3))
    assert match_fraction(src, gen) == 1.0


def test_match_fraction_reversed_far_points():
    # widely separated collinear points; reversal maps each to the other end
    src = np.arange(6, dtype=float)[:, None] * 10.0
    gen = src[::-1].copy()
    assert match_fraction(src, gen) == 0.0
    src = np.arange(5, dtype=float)[:, None] * 10.0
    gen = src[::-1].copy()
    assert match_fraction(src, gen) == pytest.approx(1.0 / 5.0)  # middle point only


def test_match_fraction_counts_are_integers():
    rng = np.random.default_rng(7)
    src = rng.standard_normal((9, 2))
    gen = rng.standard_normal((9, 2))
    frac = match_fraction(src, gen)
    assert (frac * 9) == pytest.approx(round(frac * 9))


def test_match_fraction_cap():
    with pytest.raises(MetricError):
        match_fraction(np.zeros((5, 1)), np.zeros((5, 1)), max_n=4)


def test_assignment_matches_brute_force_small():
    rng = np.random.default_rng(8)
    for _ in range(60):
        n = rng.integers(1, 8)
        cost = rng.uniform(0, 10, size=(n, n))
        _, total = min_cost_assignment(cost)
        assert total == pytest.approx(brute_force_assignment_cost(cost), abs=1e-9)


@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40, deadline=None)
def test_assignment_optimality_property(n, seed):
    cost = np.random.default_rng(seed).uniform(0, 1, size=(n, n))
    _, total = min_cost_assignment(cost)
    assert total <= brute_force_assignment_cost(cost) + 1e-9


def test_assignment_tie_break_deterministic():
    cost = np.zeros((5, 5))
    a1, _ = min_cost_assignment(cost)
    a2, _ = min_cost_assignment(cost)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(a1, np.arange(5))  # lowest-index ties


def test_assignment_rejects_bad_input():
    with pytest.raises(ValueError):
        min_cost_assignment(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        min_cost_assignment(np.array([[np.inf, 1.0], [1.0, 0.0]]))


# ---------------------------------------------------------------- W1 smoothing


def test_w1_1d_exact_values():
    assert wasserstein1_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert wasserstein1_1d([3.0, 0.0], [0.0, 3.0]) == 0.0


def test_smoothing_zero_noise_is_identity():
    rng = np.random.default_rng(9)
    a = rng.standard_normal(32)
    b = rng.standard_normal(32)
    res = wasserstein_smoothing_check(a, b, noise_std=0.0, rng=np.random.default_rng(0))
    assert res.smoothed == pytest.approx(res.raw, rel=1e-12)


def test_smoothing_identical_sets_give_zero_raw():
    a = np.array([0.0, 1.0, 2.0])
    res = wasserstein_smoothing_check(a, a.copy(), noise_std=0.0,
                                      rng=np.random.default_rng(0))
    assert res.raw == 0.0
    assert res.smoothed == 0.0


def test_smoothing_reduces_w1_usually():
    rng = np.random.default_rng(0)
    wins = 0
    trials = 50
    for _ in range(trials):
        a = rng.standard_normal(64)
        b = rng.standard_normal(64)
        res = wasserstein_smoothing_check(a, b, noise_std=1.0, rng=rng, redraws=100)
        wins += res.smoothed <= res.raw
    assert wins >= int(0.85 * trials)


def test_smoothing_multidim_uses_entropic_path():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((16, 2))
    b = rng.standard_normal((16, 2))
    res = wasserstein_smoothing_check(a, b, noise_std=0.5, rng=rng, redraws=4, reg=0.05)
    assert res.raw > 0 and res.smoothed > 0


# ---------------------------------------------------------------- report


def test_evaluate_report_fields():
    rng = np.random.default_rng(10)
    src = rng.standard_normal((20, 4))
    gen = 2.0 * src
    tgt = rng.standard_normal((25, 4)) * 2.0
    report = evaluate(src, gen, tgt)
    assert report.mean_cosine == pytest.approx(1.0)
    assert report.n_eval == 20
    assert report.mse == pytest.approx(np.mean(src ** 2))
    assert 0.0 <= report.match_fraction <= 1.0
    assert report.sinkhorn >= 0.0
