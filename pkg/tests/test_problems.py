import math

import numpy as np
import pytest

from qdiana.exceptions import InvalidInputError, NoConvergenceError, NotStronglyConvexError
from qdiana.models.problem import Regularizer
from qdiana.services.dataio import synth_problem
from qdiana.services.engine import prox_gradient_residual, solve_reference
from qdiana.services.problems import (
    coercivity_ratio,
    constants,
    evaluate_component,
    fd_check,
    logistic_problem,
    prox,
    quadratic_problem,
    smoothness_ratio,
    softplus
)
from qdiana.utils.enums import ProblemKind, RegularizerKind


def single_logistic(a, lambda2):
    return logistic_problem(np.array([[a]], dtype=float), np.array([[1.0]]), lambda2)


def half_norm_squared(center):
    center = np.asarray(center, dtype=float)
    return quadratic_problem(np.eye(center.size)[np.newaxis, np.newaxis], center[np.newaxis, np.newaxis])


def test_logistic_component_at_origin():
    loss, gradient = evaluate_component(single_logistic([1.0, 0.0], 0.0), 0, 0, np.zeros(2))

    assert loss == pytest.approx(math.log(2.0))
    np.testing.assert_allclose(gradient, [-0.5, 0.0])


def test_ridge_only_component():
    loss, gradient = evaluate_component(single_logistic([0.0, 0.0], 0.1), 0, 0, np.array([2.0, 0.0]))

    assert loss == pytest.approx(math.log(2.0) + 0.2)
    np.testing.assert_allclose(gradient, [0.2, 0.0])


def test_softplus_is_stable_at_extremes():
    values = softplus(np.array([-800.0, 0.0, 800.0]))

    assert values[0] == 0.0
    assert values[1] == pytest.approx(math.log(2.0))
    assert values[2] == 800.0


def test_component_index_and_shape_errors(small_logistic):
    with pytest.raises(InvalidInputError):
        small_logistic.component(small_logistic.n, 0, np.zeros(small_logistic.d))
    with pytest.raises(InvalidInputError):
        small_logistic.component(0, -1, np.zeros(small_logistic.d))
    with pytest.raises(InvalidInputError):
        small_logistic.component(0, 0, np.zeros(small_logistic.d + 1))


def test_problem_construction_errors():
    with pytest.raises(InvalidInputError):
        single_logistic([1.0], -0.1)
    with pytest.raises(InvalidInputError):
        logistic_problem(np.ones((1, 1, 2)), np.array([[0.5]]), 0.0)
    with pytest.raises(InvalidInputError):
        quadratic_problem(np.ones((1, 1, 2, 3)), np.ones((1, 1, 2)))


def test_problem_arrays_are_frozen(small_logistic):
    with pytest.raises(ValueError):
        small_logistic.features[0, 0, 0] = 1.0


@pytest.mark.parametrize(
    "regularizer, gamma, x, expected",
    [
        (Regularizer(), 0.5, [3.0, -1.0], [3.0, -1.0]),
        (Regularizer(kind=RegularizerKind.L1, strength=2.0), 0.5, [2.0, -0.5, 0.0], [1.0, 0.0, 0.0]),
        (Regularizer(kind=RegularizerKind.L2, strength=1.0), 1.0, [2.0], [1.0]),
    ],
)
def test_prox_closed_forms(regularizer, gamma, x, expected):
    np.testing.assert_allclose(prox(regularizer, gamma, np.array(x)), expected)


def test_prox_requires_positive_step():
    with pytest.raises(InvalidInputError):
        prox(Regularizer(), 0.0, np.zeros(2))


def test_regularizer_strength_must_be_nonnegative():
    with pytest.raises(ValueError):
        Regularizer(kind=RegularizerKind.L1, strength=-1.0)


def test_constants_examples():
    L, mu, kappa = constants(half_norm_squared([0.0, 0.0]))
    assert (L, mu, kappa) == pytest.approx((1.0, 1.0, 1.0))

    L, mu, kappa = constants(single_logistic([2.0, 0.0], 0.1))
    assert (L, mu, kappa) == pytest.approx((1.1, 0.1, 6.0))


def test_condition_number_needs_strong_convexity():
    problem = single_logistic([1.0, 1.0], 0.0)

    assert problem.mu == 0.0
    with pytest.raises(NotStronglyConvexError):
        _ = problem.constants.kappa


def test_gradient_checks(small_logistic):
    assert fd_check(half_norm_squared([1.0, -2.0, 3.0]), np.array([1.0, 2.0, 3.0])).max_relative_error <= 1e-8

    report = fd_check(small_logistic, np.zeros(small_logistic.d), probes=10)
    assert report.probe_count == 10
    assert report.max_relative_error <= 1e-6

    with pytest.raises(InvalidInputError):
        fd_check(small_logistic, np.zeros(small_logistic.d), h=0.0)


def test_observed_curvature_respects_constants(small_logistic, small_quadratic):
    for problem in (small_logistic, small_quadratic):
        assert smoothness_ratio(problem, pairs=50) <= problem.L * (1.0 + 1e-9)
        assert coercivity_ratio(problem, pairs=50) >= problem.mu - 1e-9 * problem.L


def test_quadratic_constants_follow_spectrum(small_quadratic):
    assert small_quadratic.L == pytest.approx(1.0)
    assert small_quadratic.mu == pytest.approx(0.25)


def test_full_gradient_is_mean_of_components(small_logistic):
    x = np.linspace(-1.0, 1.0, small_logistic.d)
    components = [small_logistic.component(i, j, x)[1] for i in range(small_logistic.n) for j in range(small_logistic.m)]

    np.testing.assert_allclose(small_logistic.full_gradient(x), np.mean(components, axis=0), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("problem_name", ["small_logistic", "small_quadratic"])
def test_value_does_not_depend_on_summation_order(problem_name, request):
    problem = request.getfixturevalue(problem_name)
    x = np.linspace(-0.7, 1.3, problem.d)
    losses = [problem.component(i, j, x)[0] for i in range(problem.n) for j in range(problem.m)]
    shuffled = [losses[index] for index in np.random.default_rng(11).permutation(len(losses))]

    assert problem.smooth_value(x) == pytest.approx(math.fsum(shuffled) / len(shuffled), rel=1e-12)
    assert problem.smooth_value(x) == pytest.approx(sum(reversed(shuffled)) / len(shuffled), rel=1e-12)


def test_reference_solution_of_shifted_quadratic():
    center = np.array([1.0, -2.0, 3.0])
    problem = half_norm_squared(center)

    x_star, f_star = solve_reference(problem)

    np.testing.assert_allclose(x_star, center, atol=1e-12)
    assert f_star == pytest.approx(0.0, abs=1e-24)


def test_reference_solution_meets_residual(small_logistic):
    x_star, f_star = solve_reference(small_logistic, tol=1e-12)

    assert prox_gradient_residual(small_logistic, x_star, 1.0 / small_logistic.L) <= 1e-12
    assert f_star <= small_logistic.objective(np.zeros(small_logistic.d))


def test_reference_solver_reports_exhausted_iterations(small_logistic):
    with pytest.raises(NoConvergenceError) as caught:
        solve_reference(small_logistic, tol=1e-14, max_iters=1)

    assert caught.value.best_iterate.shape == (small_logistic.d,)
    assert caught.value.residual > 1e-14


def test_l1_regularized_objective_includes_penalty():
    problem = synth_problem(
        ProblemKind.LOGISTIC, 3, 2, 2, seed=1, regularizer=Regularizer(kind=RegularizerKind.L1, strength=0.5)
    )
    x = np.array([1.0, -2.0, 0.0])

    assert problem.objective(x) == pytest.approx(problem.smooth_value(x) + 1.5)
