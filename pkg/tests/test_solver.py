import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_points
from rlr_asymptotics.expectations import PriorSpec
from rlr_asymptotics.prox import RegularizerSpec
from rlr_asymptotics.solver import (
    FixedPoint,
    InfeasiblePointError,
    ProblemSpec,
    SolverError,
    SolverKnobs,
    gamma_map,
    predict_functional,
    predict_support_recovery,
    reduced_residuals,
    residual,
    solve_fixed_point,
    solve_l2_reduced,
    sparse_l1_first_three,
    system_map,
    theory_report,
    with_lambda,
)


def test_system_map_l2_matches_rescaling_forms(rule, l2_spec):
    # with prox(x, t) = x / (1 + t) the first three outputs are closed form
    d, lam = l2_spec.delta, l2_spec.lam
    for v in random_points(1, 10):
        out = system_map(v, l2_spec, rule)
        st = v.sigma * v.tau
        assert out.alpha == pytest.approx(st * v.theta / (1 + lam * st), abs=1e-8)
        assert out.gamma == pytest.approx(st / (d * (1 + lam * st)), abs=1e-8)
        assert out.sigma == pytest.approx(st * v.r / (math.sqrt(d) * (1 + lam * st)), abs=1e-8)


def test_system_map_sparse_l1_matches_tail_forms(rule, sparse_l1_spec):
    for v in random_points(2, 20):
        quad = system_map(v, sparse_l1_spec, rule)
        closed = system_map(v, sparse_l1_spec, rule, closed_form=True)
        np.testing.assert_allclose(quad.as_array(), closed.as_array(), atol=1e-8, rtol=0)


def test_system_map_is_deterministic(rule, sparse_l1_spec):
    v = random_points(4, 1)[0]
    a = system_map(v, sparse_l1_spec, rule).as_array()
    b = system_map(v, sparse_l1_spec, rule).as_array()
    assert a.tobytes() == b.tobytes()


def test_system_map_rejects_points_outside_domain(rule, l2_spec):
    with pytest.raises(InfeasiblePointError):
        system_map(FixedPoint(0.5, -1.0, 1.0, 1.0, 1.0, 1.0), l2_spec, rule)


def test_closed_forms_need_l1(l2_spec):
    with pytest.raises(ValueError):
        sparse_l1_first_three(random_points(0, 1)[0], l2_spec)


def test_l2_fixed_point_and_closed_form_relations(rule, l2_spec):
    sol = solve_fixed_point(l2_spec)
    assert sol.converged
    assert sol.residual < 1e-8
    assert residual(sol.point, l2_spec, rule) == pytest.approx(sol.residual, abs=1e-15)
    v, d, lam = sol.point, l2_spec.delta, l2_spec.lam
    assert v.theta == pytest.approx(v.alpha / (v.gamma * d), abs=1e-6)
    assert v.tau == pytest.approx(d * v.gamma / (v.sigma * (1 - lam * d * v.gamma)), abs=1e-6)
    assert v.r == pytest.approx(v.sigma / (v.gamma * math.sqrt(d)), abs=1e-6)


def test_sparse_l1_solution_same_for_both_code_paths(sparse_l1_spec):
    quad = solve_fixed_point(sparse_l1_spec)
    closed = solve_fixed_point(sparse_l1_spec, closed_form=True)
    assert quad.converged and closed.converged
    np.testing.assert_allclose(quad.point.as_array(), closed.point.as_array(), atol=1e-6, rtol=0)


def test_reduced_agrees_with_full(l2_spec, rule):
    full = solve_fixed_point(l2_spec)
    red = solve_l2_reduced(l2_spec)
    assert red.converged
    np.testing.assert_allclose(red.point.as_array(), full.point.as_array(), atol=1e-6, rtol=0)
    v = red.point
    assert np.max(np.abs(reduced_residuals(v.alpha, v.sigma, v.gamma, l2_spec, rule))) <= SolverKnobs().tol


def test_lambda_zero_routes_to_reduced_system():
    none = solve_fixed_point(ProblemSpec(1.0, 8.0, 0.0, RegularizerSpec("none")))
    ridge0 = solve_fixed_point(ProblemSpec(1.0, 8.0, 0.0, RegularizerSpec("l2sq")))
    assert none.converged
    np.testing.assert_array_equal(none.point.as_array(), ridge0.point.as_array())
    # the unpenalized fit is inflated: correlation above one
    assert none.point.alpha > 1


def test_unregularized_fit_infeasible_below_one_sample_per_feature():
    with pytest.raises((SolverError, InfeasiblePointError)):
        solve_l2_reduced(ProblemSpec(1.0, 0.8, 0.0, RegularizerSpec("none")))


def test_reduced_rejects_l1(sparse_l1_spec):
    with pytest.raises(ValueError):
        solve_l2_reduced(sparse_l1_spec)


@pytest.mark.parametrize(
    "spec",
    [
        ProblemSpec(1.0, 4.0, 0.5, RegularizerSpec("none")),
        ProblemSpec(1.0, 4.0, 0.0, RegularizerSpec("l1")),
    ],
)
def test_invalid_lambda_for_regularizer(spec):
    with pytest.raises(ValueError):
        solve_fixed_point(spec)


def test_problem_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec(0.0, 4.0, 0.5)
    with pytest.raises(ValueError):
        ProblemSpec(1.0, -1.0, 0.5)
    with pytest.raises(ValueError):
        ProblemSpec(1.0, 4.0, -0.1)
    with pytest.raises(ValueError):
        ProblemSpec(1.0, 4.0, 0.1, prior=PriorSpec("gaussian", 2.0))
    with pytest.raises(ValueError):
        SolverKnobs(damping=0.0)


def test_max_iter_exhaustion_returns_best_iterate(l2_spec):
    sol = solve_fixed_point(l2_spec, SolverKnobs(max_iter=2))
    assert not sol.converged
    assert sol.iterations == 2
    assert np.isfinite(sol.residual) and sol.residual > SolverKnobs().tol


def test_infeasible_start_raises(l2_spec):
    with pytest.raises(SolverError):
        solve_fixed_point(l2_spec, SolverKnobs(init=FixedPoint(0.5, 1.0, -1.0, 1.0, 1.0, 1.0)))


def test_damped_iteration_reaches_same_point(l2_spec):
    a = solve_fixed_point(l2_spec)
    b = solve_fixed_point(l2_spec, SolverKnobs(damping=0.5))
    np.testing.assert_allclose(a.point.as_array(), b.point.as_array(), atol=1e-8)


def test_gamma_map_forms(l2_spec):
    v = FixedPoint(0.3, 0.4, 0.35, 0.2, 5.0, 0.45)
    st = v.sigma * v.tau
    arg = st * (v.theta * 1.3 + v.r / 2.0 * -0.7)
    assert gamma_map(1.3, -0.7, v, l2_spec) == pytest.approx(arg / (1 + 0.5 * st))
    none = ProblemSpec(1.0, 4.0, 0.0, RegularizerSpec("none"))
    assert gamma_map(1.3, -0.7, v, none) == pytest.approx(arg)
    l1 = ProblemSpec(1.0, 4.0, 10.0, RegularizerSpec("l1"))
    assert gamma_map(0.1, 0.2, v, l1) == 0.0


@pytest.mark.parametrize(
    "spec",
    [
        ProblemSpec(1.0, 4.0, 0.5, RegularizerSpec("l2sq")),
        ProblemSpec(1.0, 4.0, 0.3, RegularizerSpec("l1"), PriorSpec("sparse", 1.0, 0.25)),
        ProblemSpec(1.0, 8.0, 0.0, RegularizerSpec("none")),
    ],
    ids=["l2sq", "l1", "none"],
)
def test_functionals_reproduce_fixed_point_moments(spec, rule):
    sol = solve_fixed_point(spec)
    v, k2 = sol.point, spec.kappa**2
    tol = 10 * SolverKnobs().tol
    assert predict_functional(lambda u, b: u * b / k2, v, spec, rule) == pytest.approx(v.alpha, abs=tol)
    centered = predict_functional(lambda u, b: (u - v.alpha * b) ** 2, v, spec, rule)
    assert centered == pytest.approx(v.sigma**2, abs=tol)
    assert predict_functional(lambda u, b: 1.0, v, spec, rule) == pytest.approx(1.0, abs=1e-13)
    second = predict_functional(lambda u, b: u * u, v, spec, rule)
    assert second == pytest.approx(k2 * v.alpha**2 + v.sigma**2, abs=tol)


def test_support_recovery_limits(sparse_l1_spec):
    v = solve_fixed_point(sparse_l1_spec).point
    tiny = predict_support_recovery(v, with_lambda(sparse_l1_spec, 1e-12))
    assert tiny.e1 == pytest.approx(1.0, abs=1e-10)
    assert tiny.e2 == pytest.approx(0.0, abs=1e-10)
    big = predict_support_recovery(v, with_lambda(sparse_l1_spec, 50.0))
    assert big.t_offsupport >= 8 and big.t_onsupport >= 8
    assert big.e1 < 1e-14 and big.e2 > 1 - 1e-13


def test_support_recovery_thresholds_and_monotonicity(sparse_l1_spec):
    v = solve_fixed_point(sparse_l1_spec).point
    pred = predict_support_recovery(v, sparse_l1_spec)
    d, s = sparse_l1_spec.delta, 0.25
    assert pred.t_offsupport == pytest.approx(0.8 / (v.r / math.sqrt(d)))
    assert pred.t_onsupport == pytest.approx(0.8 / math.sqrt(v.r**2 / d + v.theta**2 / s))
    assert 0 < pred.e1 < 1 and 0 < pred.e2 < 1
    e1 = [predict_support_recovery(v, with_lambda(sparse_l1_spec, lam)).e1 for lam in np.linspace(0.05, 2, 30)]
    assert np.all(np.diff(e1) < 0)
    with pytest.raises(ValueError):
        predict_support_recovery(v, ProblemSpec(1.0, 4.0, 0.5, RegularizerSpec("l2sq")))


def test_correlation_decreases_with_lambda():
    base = ProblemSpec(1.0, 4.0, 0.1, RegularizerSpec("l2sq"))
    alphas = [solve_fixed_point(with_lambda(base, lam)).point.alpha for lam in np.linspace(0.05, 2.0, 10)]
    assert np.all(np.diff(alphas) <= 0)


def test_theory_report_fields(l2_spec):
    rep = theory_report(l2_spec)
    assert rep.converged and rep.support is None
    assert rep.mse_debiased == pytest.approx(rep.variance / rep.correlation**2, rel=1e-14)
    v = rep.fixed_point
    # E[(Gamma - beta)^2] = kappa^2 (1 - alpha)^2 + sigma^2 for a Gaussian prior
    assert rep.mse_raw == pytest.approx((1 - v.alpha) ** 2 + v.sigma**2, abs=1e-9)


def test_fixed_point_roundtrip():
    v = FixedPoint(1, 2, 3, 4, 5, 6)
    assert FixedPoint.from_array(v.as_array()) == v
    assert replace(v, r=7).r == 7
