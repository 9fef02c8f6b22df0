import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochflow.optim import adam_init, adam_step, ema_init, ema_update


class ReferenceAdam:
    """Independent scalar Adam, straight from the update equations."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = 0.0
        self.t = 0

    def step(self, w, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def test_first_step_is_signed_learning_rate():
    params = {"w": np.array([1.0, -2.0])}
    state = adam_init(params, lr=0.1)
    adam_step(state, params, {"w": np.array([3.0, -0.5])})
    # bias correction makes m_hat = g and v_hat = g^2 on step one
    np.testing.assert_allclose(params["w"], [1.0 - 0.1, -2.0 + 0.1], rtol=1e-6)


def test_zero_gradients_leave_parameters_unchanged():
    params = {"w": np.array([0.5, 1.5]), "b": np.array([[2.0]])}
    before = {k: v.copy() for k, v in params.items()}
    state = adam_init(params, lr=0.1)
    for _ in range(5):
        adam_step(state, params, {k: np.zeros_like(v) for k, v in params.items()})
    for k in params:
        np.testing.assert_array_equal(params[k], before[k])


def test_matches_reference_adam_on_quadratic():
    params = {"w": np.array([1.0])}
    state = adam_init(params, lr=0.01)
    ref = ReferenceAdam(lr=0.01)
    w_ref = 1.0
    seen = [1.0]
    for _ in range(3):
        g = 2.0 * params["w"][0]
        g_ref = 2.0 * w_ref
        adam_step(state, params, {"w": np.array([g])})
        w_ref = ref.step(w_ref, g_ref)
        assert params["w"][0] == pytest.approx(w_ref, rel=1e-12)
        seen.append(params["w"][0])
    assert all(b < a for a, b in zip(seen, seen[1:]))  # monotone decrease on w^2


def test_step_counter_increments():
    params = {"w": np.array([1.0])}
    state = adam_init(params, lr=0.1)
    for expected in (1, 2, 3):
        adam_step(state, params, {"w": np.array([1.0])})
        assert state.step_count == expected


def test_shape_mismatch_rejected():
    params = {"w": np.array([1.0, 2.0])}
    state = adam_init(params, lr=0.1)
    with pytest.raises(ValueError):
        adam_step(state, params, {"w": np.array([1.0])})
    with pytest.raises(ValueError):
        adam_step(state, params, {"other": np.array([1.0, 2.0])})


def test_ema_fixed_point():
    params = {"w": np.array([1.0, -3.0])}
    state = ema_init(params, decay=0.999)
    ema_update(state, params)
    np.testing.assert_array_equal(state.shadow["w"], params["w"])


def test_ema_single_step_arithmetic():
    state = ema_init({"w": np.array([0.0])}, decay=0.999)
    ema_update(state, {"w": np.array([1.0])})
    assert state.shadow["w"][0] == pytest.approx(0.001, rel=1e-12)


def test_ema_geometric_convergence():
    state = ema_init({"w": np.array([0.0])}, decay=0.999)
    target = {"w": np.array([1.0])}
    for k in range(1, 200):
        ema_update(state, target)
        # closed form: shadow_k = 1 - 0.999^k
        assert state.shadow["w"][0] == pytest.approx(1.0 - 0.999 ** k, rel=1e-9)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(0.01, 0.99))
@settings(max_examples=50, deadline=None)
def test_ema_shadow_stays_in_historical_hull(values, decay):
    state = ema_init({"w": np.array([values[0]])}, decay=decay)
    lo = hi = values[0]
    for v in values[1:]:
        ema_update(state, {"w": np.array([v])})
        lo, hi = min(lo, v), max(hi, v)
        assert lo - 1e-12 <= state.shadow["w"][0] <= hi + 1e-12


def test_ema_decay_validated():
    with pytest.raises(ValueError):
        ema_init({"w": np.array([1.0])}, decay=1.0)
    with pytest.raises(ValueError):
        ema_init({"w": np.array([1.0])}, decay=0.0)
