"""Invariant suites run by ``rlr-asym selftest``.

Each suite raises AssertionError naming the violated invariant. Suites
that integrate take the quadrature order as an argument so a degraded
rule can be forced from the command line.
"""
from __future__ import annotations

import math
import time

import numpy as np

from .expectations import PriorSpec, expect_z1z2
from .prox import RHO, RegularizerSpec, moreau_envelope, prox_rho, prox_rho_derivative
from .scalar import DEFAULT_ORDER, gauss_hermite, normal_pdf, q_function, rho, rho_prime, rho_second
from .solver import (
    FixedPoint,
    ProblemSpec,
    regularizer_moments,
    solve_fixed_point,
    solve_l2_reduced,
    sparse_l1_first_three,
)


def _check(cond, what):
    if not cond:
        raise AssertionError(what)


def gauss_hermite_exactness(order=DEFAULT_ORDER):
    for n in (2, 5, 20, 80):
        rule = gauss_hermite(n)
        for k in range(0, 2 * n, 2):
            exact = float(np.prod(np.arange(k - 1, 0, -2, dtype=float)))
            got = rule.expect(rule.nodes**k)
            _check(abs(got - exact) <= 1e-10 * max(1.0, exact), f"E[Z^{k}] with {n} nodes: {got} != {exact}")


def link_derivatives(order=DEFAULT_ORDER):
    z = np.linspace(-20, 20, 401)
    h = 1e-5
    fd1 = (rho(z + h) - rho(z - h)) / (2 * h)
    fd2 = (rho_prime(z + h) - rho_prime(z - h)) / (2 * h)
    _check(np.max(np.abs(fd1 - rho_prime(z))) < 1e-6, "rho' vs finite difference of rho")
    _check(np.max(np.abs(fd2 - rho_second(z))) < 1e-6, "rho'' vs finite difference of rho'")


def stein_identity(order=DEFAULT_ORDER):
    rule = gauss_hermite(order)
    for k in (0.5, 1.0, 2.0):
        lhs = rule.expect(rule.nodes * rho_prime(k * rule.nodes))
        rhs = k * rule.expect(rho_second(k * rule.nodes))
        _check(abs(lhs - rhs) < 1e-8, f"Stein identity at kappa={k}: {lhs} vs {rhs}")


def q_function_properties(order=DEFAULT_ORDER):
    t = np.linspace(-8, 8, 161)
    _check(np.max(np.abs(q_function(t) + q_function(-t) - 1)) < 1e-15, "Q(t) + Q(-t) = 1")
    _check(np.all(np.diff(q_function(t)) < 0), "Q decreasing")
    tt = np.linspace(1.01, 30, 200)
    _check(np.all(q_function(tt) < normal_pdf(tt) / tt), "Q(t) < phi(t)/t for t > 1")


def moreau_derivatives(order=DEFAULT_ORDER):
    rng = np.random.default_rng(7)
    h = 1e-6
    for f in (RegularizerSpec("l1"), RegularizerSpec("l2sq"), RegularizerSpec("none"), RHO):
        x = rng.uniform(-10, 10, 50)
        t = rng.uniform(0.1, 5, 50)
        if f == RHO:
            p = prox_rho(x, t)
        else:
            p = f.prox(x, t)
            if f.kind == "l1":
                keep = np.abs(np.abs(x) - t) > 1e-3
                x, t, p = x[keep], t[keep], p[keep]
        dx = (moreau_envelope(f, x + h, t) - moreau_envelope(f, x - h, t)) / (2 * h)
        dt = (moreau_envelope(f, x, t + h) - moreau_envelope(f, x, t - h)) / (2 * h)
        name = f if isinstance(f, str) else f.kind
        _check(np.max(np.abs(dx - (x - p) / t)) < 1e-5, f"Moreau x-derivative ({name})")
        _check(np.max(np.abs(dt + (x - p) ** 2 / (2 * t**2))) < 1e-5, f"Moreau t-derivative ({name})")


def prox_rho_reflection(order=DEFAULT_ORDER):
    rng = np.random.default_rng(11)
    x = rng.uniform(-10, 10, 100)
    t = rng.uniform(0.01, 5, 100)
    err = np.max(np.abs(prox_rho(x + t, t) + prox_rho(-x, t)))
    _check(err < 1e-10, f"Prox_t(x + t) = -Prox_t(-x) violated by {err:.2e}")


def prox_rho_slope(order=DEFAULT_ORDER):
    rng = np.random.default_rng(13)
    x = rng.uniform(-10, 10, 100)
    t = rng.uniform(0.01, 5, 100)
    h = 1e-5
    fd = (prox_rho(x + h, t) - prox_rho(x - h, t)) / (2 * h)
    err = np.max(np.abs(fd - prox_rho_derivative(x, t)))
    _check(err < 1e-6, f"prox derivative vs finite difference off by {err:.2e}")


def link_quadrature(order=DEFAULT_ORDER):
    rule = gauss_hermite(order)
    for k in (0.5, 1.0, 3.0):
        got = expect_z1z2(lambda z1, z2: rho_prime(-k * z1), rule)
        _check(abs(got - 0.5) < 1e-12, f"E[rho'(-kappa Z)] = 1/2 at kappa={k}")


def sparse_closed_form(order=DEFAULT_ORDER):
    rule = gauss_hermite(order)
    spec = ProblemSpec(1.0, 4.0, 0.8, RegularizerSpec("l1"), PriorSpec("sparse", 1.0, 0.25))
    rng = np.random.default_rng(19)
    for _ in range(20):
        v = FixedPoint(*rng.uniform(0.1, 3.0, 6))
        m_beta, m_z, second = regularizer_moments(v, spec, rule)
        quad = np.array([m_beta / spec.kappa**2, m_z / (v.r * math.sqrt(spec.delta)), second])
        closed = np.array(sparse_l1_first_three(v, spec))
        err = float(np.max(np.abs(quad - closed)))
        _check(err < 1e-8, f"sparse l1 closed forms vs quadrature differ by {err:.2e} at {v}")


def l2_reduction(order=DEFAULT_ORDER):
    from .solver import SolverKnobs

    knobs = SolverKnobs(quad_order=order)
    spec = ProblemSpec(1.0, 4.0, 0.5, RegularizerSpec("l2sq"))
    full = solve_fixed_point(spec, knobs)
    red = solve_l2_reduced(spec, knobs)
    _check(full.converged and red.converged, "l2 solves converge")
    err = float(np.max(np.abs(full.point.as_array() - red.point.as_array())))
    _check(err < 1e-6, f"six-equation vs reduced l2 solutions differ by {err:.2e}")


SUITES = [
    ("gauss-hermite-exactness", gauss_hermite_exactness),
    ("link-derivatives", link_derivatives),
    ("q-function", q_function_properties),
    ("stein-identity", stein_identity),
    ("moreau-envelope-derivatives", moreau_derivatives),
    ("prox-rho-reflection-identity", prox_rho_reflection),
    ("prox-rho-derivative", prox_rho_slope),
    ("link-quadrature", link_quadrature),
    ("sparse-closed-form-vs-quadrature", sparse_closed_form),
    ("l2-reduction-consistency", l2_reduction),
]


def run_selftest(order=DEFAULT_ORDER, out=print):
    """Run every suite; return ``(ok, first_failure_name, rows)``."""
    rows = []
    first = None
    for name, fn in SUITES:
        t0 = time.perf_counter()
        try:
            fn(order)
            err = None
        except Exception as exc:  # any failure, numerical or assertion
            err = f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        rows.append((name, err is None, dt, err))
        out(f"{'PASS' if err is None else 'FAIL'}  {name:<34s} {dt:7.3f} s" + ("" if err is None else f"  {err}"))
        if err is not None and first is None:
            first = name
    return first is None, first, rows
