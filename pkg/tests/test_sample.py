import numpy as np
import pytest

from stochflow.interpolant import InterpolantSchedule
from stochflow.net import zero_model
from stochflow.sample import (
    IntegrationError,
    SamplerConfig,
    SamplerConfigError,
    generate,
    integrate_ode,
    integrate_sde,
    model_fields,
    perturb_source,
    sigma,
)
from stochflow.shells import make_task
from stochflow.train import TrainConfig, train

STOCH = InterpolantSchedule("sin_squared", 1.0)


def test_perturb_source_zero_eps_is_identity():
    x = np.random.default_rng(0).standard_normal((4, 3))
    out = perturb_source(x, 0.0, np.random.default_rng(1))
    np.testing.assert_array_equal(out, x)
    assert out is not x  # caller may mutate safely


def test_perturb_source_norm_concentrates():
    # chi distribution: ||z|| ~ sqrt(d) = 100 in d = 10000
    x = np.zeros((8, 10000))
    out = perturb_source(x, 1.0, np.random.default_rng(2))
    norms = np.linalg.norm(out - x, axis=1)
    np.testing.assert_allclose(norms, 100.0, rtol=0.05)


def test_perturb_source_fresh_noise_per_call():
    x = np.zeros((2, 4))
    rng = np.random.default_rng(3)
    a = perturb_source(x, 1.0, rng)
    b = perturb_source(x, 1.0, rng)
    assert not np.array_equal(a, b)
    c = perturb_source(x, 1.0, np.random.default_rng(3))
    d = perturb_source(x, 1.0, np.random.default_rng(3))
    np.testing.assert_array_equal(c, d)


@pytest.mark.parametrize("solver", ["euler", "heun"])
@pytest.mark.parametrize("steps", [1, 7, 50])
def test_constant_field_integrates_exactly(solver, steps):
    c = np.array([[2.0, -1.0]])
    cfg = SamplerConfig(solver=solver, steps=steps)
    out = integrate_ode(lambda x, t: np.broadcast_to(c, x.shape), np.zeros((3, 2)), cfg)
    np.testing.assert_allclose(out, np.broadcast_to(c, (3, 2)), rtol=1e-14)


def test_single_euler_step_definition():
    field = lambda x, t: x + t  # evaluated only at t=0
    x0 = np.array([[1.0, 2.0]])
    out = integrate_ode(field, x0, SamplerConfig(solver="euler", steps=1))
    np.testing.assert_allclose(out, x0 + x0, rtol=1e-15)


def _ode_error(solver, steps):
    # linear field v(x, t) = x has exact solution e * x0 at t = 1
    cfg = SamplerConfig(solver=solver, steps=steps)
    out = integrate_ode(lambda x, t: x, np.ones((1, 1)), cfg)
    return abs(out[0, 0] - np.e)


@pytest.mark.parametrize("solver,min_order", [("euler", 0.9), ("heun", 1.8)])
def test_empirical_convergence_order(solver, min_order):
    steps = np.array([10, 20, 40, 80])
    errors = np.array([_ode_error(solver, s) for s in steps])
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    assert -slope >= min_order


def test_heun_error_quarters_when_steps_double():
    e20, e40 = _ode_error("heun", 20), _ode_error("heun", 40)
    assert e20 / e40 == pytest.approx(4.0, rel=0.2)


def test_trajectory_recording():
    cfg = SamplerConfig(solver="euler", steps=5)
    x0 = np.zeros((2, 3))
    out, traj = integrate_ode(lambda x, t: np.ones_like(x), x0, cfg, record=True)
    assert traj.states.shape == (6, 2, 3)
    np.testing.assert_array_equal(traj.states[0], x0)
    np.testing.assert_array_equal(traj.states[-1], out)
    np.testing.assert_allclose(traj.times, np.linspace(0, 1, 6))


def test_non_finite_state_reports_step():
    def exploding(x, t):
        return x * 1e200
    with pytest.raises(IntegrationError) as err, np.errstate(over="ignore"):
        integrate_ode(exploding, np.ones((1, 1)), SamplerConfig(solver="euler", steps=10))
    assert err.value.step >= 0


def test_sigma_margin_clamp():
    cfg = SamplerConfig(solver="euler_maruyama", steps=10, schedule=STOCH,
                        diffusion_coef=1.0, margin=1e-3)
    assert sigma(cfg, 0.0005) == 0.0
    assert sigma(cfg, 0.9999) == 0.0
    assert sigma(cfg, 0.5) == pytest.approx(np.sqrt(2.0))


def test_sde_requires_stochastic_schedule():
    cfg_bad = SamplerConfig(solver="euler_maruyama", steps=10,
                            schedule=InterpolantSchedule("none"))
    with pytest.raises(SamplerConfigError):
        integrate_sde(lambda x, t: x, lambda x, t: x, np.ones((1, 1)), cfg_bad,
                      np.random.default_rng(0))


def test_sde_with_zero_diffusion_equals_euler_bitwise():
    rng = np.random.default_rng(5)
    field = lambda x, t: np.sin(3.0 * x) + t
    x0 = rng.standard_normal((4, 3))
    cfg_sde = SamplerConfig(solver="euler_maruyama", steps=23, schedule=STOCH,
                            diffusion_coef=0.0)
    cfg_ode = SamplerConfig(solver="euler", steps=23)
    out_sde = integrate_sde(field, lambda x, t: x * 100.0, x0, cfg_sde,
                            np.random.default_rng(0))
    out_ode = integrate_ode(field, x0, cfg_ode)
    assert out_sde.tobytes() == out_ode.tobytes()


def test_sde_variance_matches_ito_isometry():
    # v = 0, eta = 0, c = 1: Var(x_1 - x_0) = int 2 sin^2(pi t) dt = 1
    n_paths, steps = 10000, 200
    cfg = SamplerConfig(solver="euler_maruyama", steps=steps, schedule=STOCH,
                        diffusion_coef=1.0, margin=1e-3)
    zero = lambda x, t: np.zeros_like(x)
    out = integrate_sde(zero, zero, np.zeros((n_paths, 1)), cfg,
                        np.random.default_rng(11))
    var = out.ravel().var()
    stderr = np.sqrt(2.0 / (n_paths - 1))
    assert abs(var - 1.0) <= 3 * stderr


def test_generate_zero_model_is_identity():
    model = zero_model(3)
    src = np.random.default_rng(0).standard_normal((5, 3))
    cfg = SamplerConfig(solver="heun", steps=20, source_noise=0.0)
    out = generate(model, src, cfg)
    np.testing.assert_array_equal(out, src)


def test_generate_seeded_determinism_with_noise_and_sde():
    task = make_task(64, dim=2, seed=0, test_n=16)
    result = train(task, TrainConfig(epochs_total=30, batch_size=64, seed=0,
                                     schedule=InterpolantSchedule("sin_squared", 0.5)))
    cfg = SamplerConfig(solver="euler_maruyama", steps=25, source_noise=0.5,
                        diffusion_coef=1.0, schedule=InterpolantSchedule("sin_squared", 0.5),
                        seed=7)
    a = generate(result.model, task.source_test, cfg)
    b = generate(result.model, task.source_test, cfg)
    assert a.tobytes() == b.tobytes()
    c = generate(result.model, task.source_test,
                 SamplerConfig(solver="euler_maruyama", steps=25, source_noise=0.5,
                               diffusion_coef=1.0,
                               schedule=InterpolantSchedule("sin_squared", 0.5), seed=8))
    assert not np.array_equal(a, c)


def test_deterministic_map_cardinality():
    # with eps = 0 and ODE sampling the generated set is a deterministic
    # image of the source set: at most n distinct outputs from n sources
    task = make_task(64, dim=2, seed=1, test_n=16)
    result = train(task, TrainConfig(epochs_total=30, batch_size=64, seed=0))
    cfg = SamplerConfig(solver="heun", steps=20, source_noise=0.0)
    src = np.vstack([task.source_test, task.source_test])  # every point twice
    out = generate(result.model, src, cfg)
    np.testing.assert_array_equal(out[:16], out[16:])
    assert len(np.unique(out, axis=0)) <= 16


def test_generated_shell_radius_after_training():
    task = make_task(1024, dim=2, seed=0)
    result = train(task, TrainConfig(epochs_total=200, batch_size=256, seed=1))
    cfg = SamplerConfig(solver="heun", steps=50, source_noise=0.0)
    out = generate(result.model, task.source_test, cfg)
    mean_norm = np.linalg.norm(out, axis=1).mean()
    assert abs(mean_norm - 2.0) < 0.15


def test_generate_checks_dimensions():
    model = zero_model(3)
    with pytest.raises(ValueError):
        generate(model, np.zeros((2, 4)), SamplerConfig())


def test_model_fields_wrap_heads():
    model = zero_model(2)
    velocity, score = model_fields(model)
    x = np.ones((3, 2))
    np.testing.assert_array_equal(velocity(x, 0.3), np.zeros((3, 2)))
    np.testing.assert_array_equal(score(x, 0.3), np.zeros((3, 2)))


def test_default_inference_noise_follows_training():
    from stochflow.sample import default_inference_noise
    # noised-source training keeps its jitter scale at inference; clean
    # training samples clean (noised starts are OOD for such a model)
    assert default_inference_noise(True, 0.7) == 0.7
    assert default_inference_noise(False, 0.7) == 0.0
