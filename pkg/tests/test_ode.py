import numpy as np
import pytest
from scipy.linalg import expm

from airsindy.core.errors import (
    AllModelsInfeasible,
    ConfigError,
    DerivativeBlowup,
    IntegrationError,
)
from airsindy.core.ode import (
    IntegratorConfig,
    QuadraticModel,
    SdirkIntegrator,
    evaluate_jacobian,
    evaluate_rhs,
    integrate,
    select_feasible_model,
)
from airsindy.core.regression import Criterion, ModelRanking, RegressionFit


def linear_model(a11, a12, a21, a22):
    return QuadraticModel([[0, a11, a12, 0, 0, 0], [0, a21, a22, 0, 0, 0]])


def fit(beta):
    beta = np.asarray(beta, dtype=float)
    mask = tuple(bool(b != 0) for b in beta[1:])
    return RegressionFit(mask, beta, 0.0, 1.0, 100, sum(mask), 0.0, 0.0, 1.0)


def test_rhs_and_jacobian():
    model = QuadraticModel([[1, 2, 3, 4, 5, 6], [0, 0, 0, 0, 1, 0]])
    np.testing.assert_allclose(evaluate_rhs(model, (1.0, 2.0)), [1 + 2 + 6 + 4 + 10 + 24, 2.0])
    np.testing.assert_allclose(evaluate_jacobian(model, (1.0, 2.0)), [[2 + 8 + 10, 3 + 5 + 24], [2.0, 1.0]])


def test_jacobian_matches_central_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(20):
        model = QuadraticModel(rng.normal(size=(2, 6)))
        y = rng.uniform(-2, 2, size=2)
        fd = np.column_stack([
            (evaluate_rhs(model, y + h * e) - evaluate_rhs(model, y - h * e)) / (2 * h) for e in np.eye(2)
        ])
        np.testing.assert_allclose(evaluate_jacobian(model, y), fd, atol=1e-6)


@pytest.mark.parametrize('rate', [-2.0, -1000.0])
def test_tight_tolerances_reach_the_exact_solution(rate):
    A = np.diag([-1.0, rate])
    y0 = np.array([1.0, 1.0])
    traj = integrate(linear_model(-1, 0, 0, rate), y0, (0.0, 3.0), IntegratorConfig(rtol=1e-8, atol=1e-10))
    assert np.max(np.abs(traj.final - expm(A * 3.0) @ y0)) <= 1e-6
    assert traj.n_steps <= 10_000


def test_tightening_tolerances_never_hurts():
    A = np.array([[-1.0, 0.5], [0.0, -2.0]])
    model = linear_model(-1, 0.5, 0, -2)
    y0 = np.array([1.0, 1.0])
    exact = expm(A * 3.0) @ y0
    errors = []
    for rtol in (1e-4, 1e-6, 1e-8):
        traj = integrate(model, y0, (0.0, 3.0), IntegratorConfig(rtol=rtol, atol=rtol * 1e-2))
        errors.append(float(np.max(np.abs(traj.final - exact))))
    assert errors[1] <= errors[0] and errors[2] <= errors[1]


def test_each_attempt_uses_one_jacobian_and_two_factorizations():
    model = linear_model(-1, 0, 0, -1000)
    integrator = SdirkIntegrator(model.rhs, model.jac)
    integrator.integrate((1.0, 1.0), (0.0, 10.0))
    assert integrator.n_jacobians == integrator.n_accepted + integrator.n_rejected
    assert integrator.n_factorizations == 2 * integrator.n_jacobians


def test_model_validation_and_serialization():
    with pytest.raises(ConfigError):
        QuadraticModel(np.zeros((2, 5)))
    model = QuadraticModel([[0.5, -1, 0, 0, 0.25, 0], [0, 0, -2, 0, 0, 0]], ('NO2', 'O3'), ((40, 10), (50, 12)), (1, 3))
    again = QuadraticModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(again.coeffs, model.coeffs)
    assert again.species == ('NO2', 'O3')
    assert again.norm_params == ((40.0, 10.0), (50.0, 12.0))
    assert again.ranks == (1, 3)
    assert model.equations()[1] == 'dO3/dt = -2.0000*y2'
    with pytest.raises(ConfigError):
        QuadraticModel.from_dict({'species': ['a', 'b']})


def test_integrator_config_validation():
    with pytest.raises(ConfigError):
        IntegratorConfig(rtol=0.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(epsilon_guard=-1.0)


def test_linear_decay_matches_matrix_exponential():
    A = np.array([[-1.0, 0.0], [0.0, -2.0]])
    model = linear_model(-1, 0, 0, -2)
    y0 = np.array([1.0, 1.0])
    traj = integrate(model, y0, (0.0, 3.0), IntegratorConfig(rtol=1e-8, atol=1e-10))
    for t in (0.5, 1.0, 2.0, 3.0):
        np.testing.assert_allclose(traj.sample([t])[0], expm(A * t) @ y0, rtol=1e-4, atol=1e-8)
    np.testing.assert_allclose(traj.final, expm(A * 3.0) @ y0, rtol=1e-4, atol=1e-8)
    assert traj.times[0] == 0.0 and traj.times[-1] == 3.0
    assert np.all(np.diff(traj.times) > 0)


def test_stiff_system_needs_few_steps():
    model = linear_model(-1, 0, 0, -1000)
    traj = integrate(model, (1.0, 1.0), (0.0, 10.0))
    assert traj.n_steps <= 10_000
    np.testing.assert_allclose(traj.final, [np.exp(-10.0), 0.0], atol=1e-6)


def test_rotation_keeps_its_radius():
    model = linear_model(0, -1, 1, 0)
    traj = integrate(model, (1.0, 0.0), (0.0, 2 * np.pi), IntegratorConfig(rtol=1e-8, atol=1e-10))
    np.testing.assert_allclose(np.hypot(*traj.final), 1.0, atol=1e-4)


@pytest.mark.parametrize('guard', [1e3, 1e6])
def test_blowup_is_caught_before_the_singularity(guard):
    # y1' = y1^2 from y1 = 1 reaches infinity at t = 1
    model = QuadraticModel([[0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 0]])
    with pytest.raises(DerivativeBlowup) as info:
        integrate(model, (1.0, 0.0), (0.0, 2.0), IntegratorConfig(epsilon_guard=guard))
    assert info.value.time < 1.0
    assert info.value.component == 0


def test_guard_applies_to_the_initial_state():
    model = linear_model(-1, 0, 0, -1)
    with pytest.raises(DerivativeBlowup) as info:
        integrate(model, (10.0, 0.0), (0.0, 1.0), IntegratorConfig(epsilon_guard=1.0))
    assert info.value.time == 0.0


def test_integrator_is_single_use_and_checks_span():
    model = linear_model(-1, 0, 0, -1)
    integrator = SdirkIntegrator(model.rhs, model.jac)
    integrator.integrate((1.0, 1.0), (0.0, 1.0))
    with pytest.raises(IntegrationError):
        integrator.integrate((1.0, 1.0), (0.0, 1.0))
    with pytest.raises(ConfigError):
        integrate(model, (1.0, 1.0), (1.0, 1.0))


def test_sampling_outside_the_span_fails():
    traj = integrate(linear_model(-1, 0, 0, -1), (1.0, 1.0), (0.0, 1.0))
    with pytest.raises(IntegrationError):
        traj.sample([1.5])


def rankings(first, second):
    return (
        ModelRanking((fit(first[0]), fit(second[0])), Criterion.AIC, 'NO2'),
        ModelRanking((fit(first[1]), fit(second[1])), Criterion.AIC, 'O3'),
    )


def test_feasible_selection_skips_exploding_pairs():
    ranked = rankings(
        first=([0, 0, 0, 1, 0, 0], [0, 0, -1, 0, 0, 0]),
        second=([0, -1, 0, 0, 0, 0], [0, 0, -1, 0, 0, 0]),
    )
    cfg = IntegratorConfig(epsilon_guard=1e3)
    model, traj = select_feasible_model(ranked, (1.0, 1.0), (0.0, 5.0), cfg)
    assert model.ranks == (2, 2)
    assert model.species == ('NO2', 'O3')
    np.testing.assert_array_equal(model.coeffs[0], [0, -1, 0, 0, 0, 0])
    again = integrate(model, (1.0, 1.0), (0.0, 5.0), cfg)
    np.testing.assert_array_equal(traj.times, again.times)
    np.testing.assert_array_equal(traj.states, again.states)


def test_default_guard_discards_the_squaring_model():
    ranked = rankings(
        first=([0, 0, 0, 1, 0, 0], [0, 0, -1, 0, 0, 0]),
        second=([0, -1, 0, 0, 0, 0], [0, 0, -1, 0, 0, 0]),
    )
    model, traj = select_feasible_model(ranked, (1.0, 0.0), (0.0, 2.0), IntegratorConfig(epsilon_guard=1e6))
    assert model.ranks == (2, 2)
    assert traj.times[-1] == 2.0


def test_tiny_guard_makes_every_pair_infeasible():
    ranked = rankings(
        first=([0, -1, 0, 0, 0, 0], [0, 0, -1, 0, 0, 0]),
        second=([0, -2, 0, 0, 0, 0], [0, 0, -2, 0, 0, 0]),
    )
    with pytest.raises(AllModelsInfeasible):
        select_feasible_model(ranked, (1.0, 1.0), (0.0, 5.0), IntegratorConfig(epsilon_guard=1e-12))


def test_trajectory_frame():
    traj = integrate(linear_model(-1, 0, 0, -1), (1.0, 1.0), (0.0, 1.0))
    frame = traj.to_frame(('NO2', 'O3'))
    assert list(frame.columns) == ['t', 'NO2', 'O3']
    assert len(frame) == traj.times.size
