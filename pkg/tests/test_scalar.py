import math

import numpy as np
import pytest

from rlr_asymptotics.scalar import (
    composite_normal_rule,
    gauss_hermite,
    normal_pdf,
    q_function,
    rho,
    rho_prime,
    rho_second,
)


def test_rho_at_zero():
    assert rho(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert rho_prime(0.0) == 0.5


def test_logistic_reflection():
    assert rho_prime(-3.7) + rho_prime(3.7) == pytest.approx(1.0, abs=1e-15)


def test_rho_overflow_safe():
    z = np.array([-700.0, -31.0, -29.0, 0.0, 29.0, 31.0, 700.0])
    r = rho(z)
    assert np.all(np.isfinite(r)) and np.all(r >= 0)
    assert r[-1] == pytest.approx(700.0)
    np.testing.assert_allclose(r, np.logaddexp(0.0, z), rtol=1e-13, atol=1e-300)
    assert np.all((rho_prime(z[1:-1]) > 0) & (rho_prime(z[1:-1]) < 1))
    assert np.all(rho_second(z) <= 0.25)


def test_link_derivatives_match_finite_differences():
    z = np.linspace(-20, 20, 801)
    h = 1e-5
    np.testing.assert_allclose((rho(z + h) - rho(z - h)) / (2 * h), rho_prime(z), atol=1e-6)
    np.testing.assert_allclose((rho_prime(z + h) - rho_prime(z - h)) / (2 * h), rho_second(z), atol=1e-6)


def test_q_function_values():
    assert q_function(0.0) == 0.5
    assert q_function(40.0) < 1e-300
    assert q_function(1.0) == pytest.approx(0.1586553, abs=1e-7)
    # trapezoid rule on the normal density over [1, 40], 4e6 intervals
    # (its own discretization error is ~2e-12)
    assert q_function(1.0) == pytest.approx(0.15865525393337387, abs=1e-11)


def test_q_function_symmetry_monotone_and_tail_bound():
    t = np.linspace(-10, 10, 2001)
    np.testing.assert_allclose(q_function(t) + q_function(-t), 1.0, atol=1e-15)
    assert np.all(np.diff(q_function(t)) <= 0)
    t = np.linspace(-5, 30, 2001)
    assert np.all(np.diff(q_function(t)) < 0)
    tt = np.linspace(1.001, 35, 500)
    assert np.all(q_function(tt) < normal_pdf(tt) / tt)


def test_q_function_relative_accuracy_in_tail():
    # Q(10) from the asymptotic series phi(t)/t * (1 - 1/t^2 + 3/t^4 - 15/t^6 + 105/t^8)
    t = 10.0
    series = normal_pdf(t) / t * (1 - 1 / t**2 + 3 / t**4 - 15 / t**6 + 105 / t**8 - 945 / t**10)
    assert q_function(t) == pytest.approx(series, rel=1e-9)


@pytest.mark.parametrize("order", [2, 3, 7, 20, 80, 150])
def test_gauss_hermite_polynomial_exactness(order):
    rule = gauss_hermite(order)
    assert abs(rule.weights.sum() - 1) < 1e-12
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    # highest degree whose powers stay finite in float64
    top = int(300 / max(1.0, np.log10(rule.nodes[-1])))
    for k in range(0, min(2 * order, top)):
        exact = 0.0 if k % 2 else float(np.prod(np.arange(k - 1, 0, -2, dtype=float)))
        got = rule.expect(rule.nodes**k)
        # odd moments cancel between terms of size ~E|Z|^k
        scale = rule.expect(np.abs(rule.nodes) ** k)
        assert abs(got - exact) <= 1e-10 * max(1.0, scale), k


def test_gauss_hermite_basic_moments_and_link_mean():
    rule = gauss_hermite(80)
    assert rule.expect(np.ones(80)) == pytest.approx(1.0, abs=1e-14)
    assert rule.expect(rule.nodes**2) == pytest.approx(1.0, abs=1e-13)
    for kappa in (0.3, 1.0, 2.5, 6.0):
        assert rule.expect(rho_prime(kappa * rule.nodes)) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
def test_stein_identity(kappa):
    rule = gauss_hermite(80)
    lhs = rule.expect(rule.nodes * rho_prime(kappa * rule.nodes))
    rhs = kappa * rule.expect(rho_second(kappa * rule.nodes))
    assert abs(lhs - rhs) < 1e-8


@pytest.mark.parametrize("order", [1, 201, 2.5])
def test_gauss_hermite_rejects_bad_order(order):
    with pytest.raises(ValueError):
        gauss_hermite(order)


def test_gauss_hermite_rule_is_cached_and_read_only():
    a = gauss_hermite(40)
    assert a is gauss_hermite(40)
    with pytest.raises(ValueError):
        a.nodes[0] = 0.0


def test_composite_rule_integrates_normal_moments():
    breaks = np.sort(np.concatenate([np.linspace(-12, 12, 13), [-3.0, 0.5, 0.5]]))[None, :]
    z, w = composite_normal_rule(breaks, 20)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.sum(w * z**4) == pytest.approx(3.0, abs=1e-12)
    # kinked integrand: E[max(Z - 0.5, 0)] = phi(0.5) - 0.5 Q(0.5)
    exact = normal_pdf(0.5) - 0.5 * q_function(0.5)
    assert np.sum(w * np.maximum(z - 0.5, 0)) == pytest.approx(exact, abs=1e-14)
