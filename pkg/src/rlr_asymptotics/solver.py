"""Six-equation fixed point for regularized logistic regression.

Unknowns ``v = (alpha, sigma, gamma, theta, tau, r)``. The first three
equations average the regularizer prox over the prior and Gaussian noise;
the last three average the prox of the logistic link over two independent
standard normals. ``system_map`` isolates one unknown per equation so that
the solution is a fixed point ``v = S(v)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .expectations import LinearKinks, PriorSpec, expect_prior_z, tensor_z1z2
from .prox import RegularizerSpec, prox_rho
from .scalar import DEFAULT_ORDER, QuadratureRule, gauss_hermite, normal_pdf, q_function, rho_prime, rho_second

log = logging.getLogger(__name__)

SIGMA2_FLOOR = 1e-12
DAMPING_FLOOR = 1.0 / 64.0
INCREASE_PATIENCE = 5


class InfeasiblePointError(ArithmeticError):
    """An update left the domain (negative radicand or nonpositive tau)."""


class SolverError(RuntimeError):
    """The fixed-point iteration could not make progress."""


@dataclass(frozen=True)
class ProblemSpec:
    kappa: float
    delta: float
    lam: float
    regularizer: RegularizerSpec = field(default_factory=RegularizerSpec)
    prior: PriorSpec | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if self.prior is None:
            object.__setattr__(self, "prior", PriorSpec("gaussian", self.kappa))
        elif not math.isclose(self.prior.kappa, self.kappa, rel_tol=0, abs_tol=1e-15):
            raise ValueError("prior.kappa must equal kappa")


@dataclass(frozen=True)
class FixedPoint:
    alpha: float
    sigma: float
    gamma: float
    theta: float
    tau: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a) -> "FixedPoint":
        return cls(*(float(x) for x in a))


DEFAULT_INIT = FixedPoint(0.5, 1.0, 1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class SolverKnobs:
    damping: float = 1.0
    tol: float = 1e-10
    max_iter: int = 2000
    quad_order: int = DEFAULT_ORDER
    init: FixedPoint = DEFAULT_INIT

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class SolveResult:
    point: FixedPoint
    residual: float
    iterations: int
    converged: bool
    damping: float


@dataclass(frozen=True)
class SupportRecoveryPrediction:
    t_offsupport: float
    t_onsupport: float
    e1: float
    e2: float


@dataclass(frozen=True)
class TheoryReport:
    fixed_point: FixedPoint
    correlation: float
    variance: float
    mse_raw: float
    mse_debiased: float
    support: SupportRecoveryPrediction | None
    residual: float
    converged: bool
    iterations: int


# -- first three equations ---------------------------------------------------

def _prox_argument(v: FixedPoint, spec: ProblemSpec):
    scale = v.sigma * v.tau
    noise = v.r / math.sqrt(spec.delta)
    return scale, noise


def gamma_map(beta, z, v: FixedPoint, spec: ProblemSpec):
    """Limiting law of one estimated coefficient given its true value and noise."""
    scale, noise = _prox_argument(v, spec)
    arg = scale * (v.theta * np.asarray(beta, dtype=float) + noise * np.asarray(z, dtype=float))
    return spec.regularizer.prox(arg, spec.lam * scale)


def _kinks(v: FixedPoint, spec: ProblemSpec):
    """Kink lines of the regularizer prox in the (beta, Z) plane, if any."""
    if spec.regularizer.kind != "l1" or spec.lam == 0:
        return None
    return LinearKinks(v.theta, v.r / math.sqrt(spec.delta), (-spec.lam, spec.lam))


def regularizer_moments(v: FixedPoint, spec: ProblemSpec, rule: QuadratureRule) -> np.ndarray:
    """(E[beta P], E[Z P], E[P^2]) with P the regularizer prox, by quadrature."""

    def g(beta, z):
        p = gamma_map(beta, z, v, spec)
        return np.stack(np.broadcast_arrays(beta * p, z * p, p * p))

    return np.asarray(expect_prior_z(g, spec.prior, rule, kinks=_kinks(v, spec)))


def sparse_thresholds(v: FixedPoint, spec: ProblemSpec):
    """Normalized thresholds (on-support, off-support) of the soft threshold."""
    s = spec.prior.sparsity
    off_scale = v.r / math.sqrt(spec.delta)
    on_scale = math.sqrt(v.r**2 / spec.delta + v.theta**2 * spec.kappa**2 / s)
    return spec.lam / on_scale, spec.lam / off_scale


def sparse_l1_first_three(v: FixedPoint, spec: ProblemSpec):
    """Closed-form (alpha, gamma, sigma^2 + kappa^2 alpha^2) for l1 with a sparse prior.

    The soft threshold applied to a Gaussian mixture integrates in terms of
    the normal tail Q at the on- and off-support thresholds. The gamma that
    enters the third relation is the one produced by the second.
    """
    if spec.regularizer.kind != "l1" or not spec.lam > 0:
        raise ValueError("closed forms need the l1 regularizer with lambda > 0")
    s = spec.prior.sparsity
    k2 = spec.kappa**2
    lam, delta = spec.lam, spec.delta
    st = v.sigma * v.tau
    t_on, t_off = sparse_thresholds(v, spec)
    q_on, q_off = float(q_function(t_on)), float(q_function(t_off))
    alpha = 2.0 * st * v.theta * q_on
    gamma = 2.0 * st / delta * (s * q_on + (1.0 - s) * q_off)
    mills = s * float(normal_pdf(t_on)) / t_on
    if s < 1:
        mills += (1.0 - s) * float(normal_pdf(t_off)) / t_off
    rhs = (
        delta * gamma * lam**2 / (2.0 * st)
        + gamma * v.r**2 / (2.0 * st)
        + k2 * v.theta**2 * q_on
        - lam**2 * mills
    )
    second_moment = 2.0 * st**2 * rhs
    return alpha, gamma, second_moment


# -- last three equations ----------------------------------------------------

@dataclass(frozen=True)
class LinkMoments:
    """E[rho'(-k Z1)(u - P)^2], E[rho''(-k Z1) P], E[2 rho'(-k Z1) / (1 + g rho''(P))]."""

    residual_sq: float
    curvature: float
    slope: float


def link_moments(alpha: float, sigma: float, gamma: float, kappa: float, rule: QuadratureRule) -> LinkMoments:
    z1, z2, w = tensor_z1z2(rule)
    u = kappa * alpha * z1 + sigma * z2
    p = prox_rho(u, gamma)
    w1 = w * rho_prime(-kappa * z1)
    w2 = w * rho_second(-kappa * z1)
    return LinkMoments(
        residual_sq=float(np.sum(w1 * (u - p) ** 2)),
        curvature=float(np.sum(w2 * p)),
        slope=float(np.sum(2.0 * w1 / (1.0 + gamma * rho_second(p)))),
    )


# -- the map -----------------------------------------------------------------

def system_map(v: FixedPoint, spec: ProblemSpec, rule: QuadratureRule, closed_form: bool = False) -> FixedPoint:
    """One sweep of S: each equation solved for its designated unknown.

    Equations one to three give alpha, gamma and sigma from the current
    point; equations four to six then give r, theta and tau using the alpha,
    sigma, gamma just produced. ``closed_form`` swaps quadrature in the first
    three for the normal-tail formulas (l1 regularizer only).

    Raises
    ------
    InfeasiblePointError
        If ``v`` has a nonpositive scale, the r radicand is not positive, or
        the tau equation has no positive solution.
    """
    if min(v.sigma, v.gamma, v.tau, v.r) <= 0 or not np.all(np.isfinite(v.as_array())):
        raise InfeasiblePointError(f"point outside the domain: {v}")
    k2 = spec.kappa**2
    if closed_form:
        alpha, gamma, second = sparse_l1_first_three(v, spec)
    else:
        m_beta, m_z, second = regularizer_moments(v, spec, rule)
        alpha = m_beta / k2
        gamma = m_z / (v.r * math.sqrt(spec.delta))
    sigma2 = second - k2 * alpha**2
    sigma = math.sqrt(max(sigma2, SIGMA2_FLOOR))
    if not gamma > 0:
        raise InfeasiblePointError(f"gamma update is not positive ({gamma:.3e})")

    lm = link_moments(alpha, sigma, gamma, spec.kappa, rule)
    r2 = 2.0 * lm.residual_sq / gamma**2
    if not r2 > 0:
        raise InfeasiblePointError("negative radicand in the r update")
    theta = -2.0 * lm.curvature / gamma
    if lm.slope >= 1.0:
        raise InfeasiblePointError("tau equation has no positive solution")
    tau = gamma / (sigma * (1.0 - lm.slope))
    return FixedPoint(alpha, sigma, gamma, theta, tau, math.sqrt(r2))


def residual(v: FixedPoint, spec: ProblemSpec, rule: QuadratureRule, closed_form: bool = False) -> float:
    return float(np.max(np.abs(system_map(v, spec, rule, closed_form).as_array() - v.as_array())))


def _validate(spec: ProblemSpec):
    if spec.regularizer.kind == "none" and spec.lam != 0:
        raise ValueError("regularizer 'none' requires lambda = 0")
    if spec.regularizer.kind == "l1" and spec.lam == 0:
        raise ValueError("lambda = 0 with the l1 regularizer is the unregularized fit; use regularizer 'none'")


def _damped_iteration(step, v0: np.ndarray, knobs: SolverKnobs, what: str) -> SolveResult:
    """Iterate v <- (1 - w) v + w step(v) with adaptive damping w.

    ``step`` maps an array to an array or raises InfeasiblePointError.
    Returns the iterate with smallest residual when max_iter is exhausted.
    """
    omega = knobs.damping
    v = np.asarray(v0, dtype=float)
    try:
        sv = step(v)
    except InfeasiblePointError as exc:
        raise SolverError(f"{what}: initial point infeasible ({exc})") from exc
    res = float(np.max(np.abs(sv - v)))
    best_v, best_res = v, res
    increases = 0
    it = 0
    while res > knobs.tol and it < knobs.max_iter:
        it += 1
        cand = v + omega * (sv - v)
        try:
            s_cand = step(cand)
        except InfeasiblePointError as exc:
            if omega <= DAMPING_FLOOR:
                raise SolverError(f"{what}: infeasible update at damping floor ({exc})") from exc
            omega = max(omega / 2, DAMPING_FLOOR)
            log.debug("%s: infeasible update, damping -> %g", what, omega)
            continue
        res_c = float(np.max(np.abs(s_cand - cand)))
        increases = increases + 1 if res_c > res else 0
        v, sv, res = cand, s_cand, res_c
        if res < best_res:
            best_v, best_res = v, res
        if increases >= INCREASE_PATIENCE and omega > DAMPING_FLOOR:
            omega = max(omega / 2, DAMPING_FLOOR)
            increases = 0
            log.debug("%s: residual rising, damping -> %g", what, omega)
    converged = res <= knobs.tol
    if converged:
        best_v, best_res = v, res
    else:
        log.warning("%s: not converged after %d iterations (residual %.3e)", what, it, best_res)
    return SolveResult(FixedPoint.from_array(best_v) if best_v.size == 6 else best_v, best_res, it, converged, omega)


def solve_fixed_point(spec: ProblemSpec, knobs: SolverKnobs = SolverKnobs(), closed_form: bool = False) -> SolveResult:
    """Solve v = S(v) by damped fixed-point iteration.

    lambda = 0 (with regularizer ``none`` or ``l2sq``) is delegated to
    :func:`solve_l2_reduced`, where the unregularized fit is well posed.
    """
    _validate(spec)
    if spec.lam == 0:
        return solve_l2_reduced(spec, knobs)
    rule = gauss_hermite(knobs.quad_order)

    def step(a):
        return system_map(FixedPoint.from_array(a), spec, rule, closed_form).as_array()

    return _damped_iteration(step, knobs.init.as_array(), knobs, "six-equation solve")


# -- quadratic penalty / unregularized reduction ------------------------------

def _solve_gamma(alpha: float, sigma: float, spec: ProblemSpec, rule: QuadratureRule) -> float:
    """Root in gamma of E[2 rho'(-k Z1) / (1 + g rho''(P))] = 1 - 1/delta + lambda g."""
    target0 = 1.0 - 1.0 / spec.delta
    if spec.lam == 0 and target0 <= 0:
        # the slope is positive, so no root exists
        raise InfeasiblePointError("delta <= 1: the unregularized fit does not exist")

    def f(g):
        return link_moments(alpha, sigma, g, spec.kappa, rule).slope - (target0 + spec.lam * g)

    # f -> 1/delta > 0 as g -> 0 and f decreases in g
    lo, hi = 0.0, 1.0
    f_hi = f(hi)
    while f_hi > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise InfeasiblePointError("no gamma solves the slope equation (unregularized fit does not exist)")
        f_hi = f(hi)
    if lo == 0.0:
        lo = hi * 1e-12
        while f(lo) < 0:
            lo *= 1e-3
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def reduced_residuals(alpha: float, sigma: float, gamma: float, spec: ProblemSpec, rule: QuadratureRule) -> np.ndarray:
    """Defining residuals of the three-equation quadratic-penalty system."""
    lm = link_moments(alpha, sigma, gamma, spec.kappa, rule)
    d = spec.delta
    return np.array([
        sigma**2 / (2 * d) - lm.residual_sq,
        -alpha / (2 * d) - lm.curvature,
        1 - 1 / d + spec.lam * gamma - lm.slope,
    ])


def solve_l2_reduced(spec: ProblemSpec, knobs: SolverKnobs = SolverKnobs()) -> SolveResult:
    """Three-equation system for the quadratic penalty (and lambda = 0).

    Iterates on (alpha, sigma); for each pair gamma is the unique root of
    the slope equation. theta, tau and r are then recovered in closed form.
    The returned residual is the larger of the (alpha, sigma) fixed-point
    gap and the absolute defining residuals of the three equations.
    """
    if spec.regularizer.kind not in ("l2sq", "none"):
        raise ValueError("the reduced system applies to the l2sq or none regularizers only")
    _validate(spec)
    rule = gauss_hermite(knobs.quad_order)
    d = spec.delta
    gammas = {}

    def step(a):
        alpha, sigma = float(a[0]), float(a[1])
        if not sigma > 0 or not np.all(np.isfinite(a)):
            raise InfeasiblePointError("sigma left the domain")
        if sigma > 1e6:
            raise InfeasiblePointError("sigma diverged (unregularized fit does not exist)")
        g = _solve_gamma(alpha, sigma, spec, rule)
        gammas[(alpha, sigma)] = g
        lm = link_moments(alpha, sigma, g, spec.kappa, rule)
        return np.array([-2.0 * d * lm.curvature, math.sqrt(max(2.0 * d * lm.residual_sq, SIGMA2_FLOOR))])

    init = knobs.init
    out = _damped_iteration(step, np.array([init.alpha, init.sigma]), knobs, "reduced solve")
    alpha, sigma = (float(x) for x in out.point)
    gamma = gammas.get((alpha, sigma))
    if gamma is None:
        gamma = _solve_gamma(alpha, sigma, spec, rule)
    defining = float(np.max(np.abs(reduced_residuals(alpha, sigma, gamma, spec, rule))))
    if spec.lam * d * gamma >= 1:
        raise InfeasiblePointError("lambda * delta * gamma >= 1: tau cannot be reconstructed")
    theta = alpha / (gamma * d)
    tau = d * gamma / (sigma * (1 - spec.lam * d * gamma))
    r = sigma / (gamma * math.sqrt(d))
    point = FixedPoint(alpha, sigma, gamma, theta, tau, r)
    res = max(out.residual, defining)
    return SolveResult(point, res, out.iterations, out.converged and res <= knobs.tol, out.damping)


# -- predictions -------------------------------------------------------------

def predict_functional(psi, v: FixedPoint, spec: ProblemSpec, rule: QuadratureRule | None = None) -> float:
    """E[psi(Gamma(beta, Z), beta)] with beta from the prior and Z ~ N(0, 1)."""
    rule = rule or gauss_hermite(DEFAULT_ORDER)

    def g(beta, z):
        out = psi(gamma_map(beta, z, v, spec), beta)
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(beta), np.shape(z)))

    return expect_prior_z(g, spec.prior, rule, kinks=_kinks(v, spec))


def predict_support_recovery(v: FixedPoint, spec: ProblemSpec) -> SupportRecoveryPrediction:
    """Limiting false-alarm (e1) and misdetection (e2) rates of the l1 fit."""
    if spec.regularizer.kind != "l1" or spec.prior.kind != "sparse" or not spec.lam > 0:
        raise ValueError("support recovery needs the l1 regularizer, a sparse prior and lambda > 0")
    t_on, t_off = sparse_thresholds(v, spec)
    return SupportRecoveryPrediction(
        t_offsupport=t_off,
        t_onsupport=t_on,
        e1=float(2.0 * q_function(t_off)),
        e2=float(1.0 - 2.0 * q_function(t_on)),
    )


def theory_report(spec: ProblemSpec, knobs: SolverKnobs = SolverKnobs()) -> TheoryReport:
    sol = solve_fixed_point(spec, knobs)
    v = sol.point
    rule = gauss_hermite(knobs.quad_order)
    mse_raw = predict_functional(lambda u, b: (u - b) ** 2, v, spec, rule)
    variance = v.sigma**2
    debiased = variance / v.alpha**2 if v.alpha != 0 else math.inf
    support = None
    if spec.regularizer.kind == "l1" and spec.prior.kind == "sparse":
        support = predict_support_recovery(v, spec)
    return TheoryReport(
        fixed_point=v,
        correlation=v.alpha,
        variance=variance,
        mse_raw=mse_raw,
        mse_debiased=debiased,
        support=support,
        residual=sol.residual,
        converged=sol.converged,
        iterations=sol.iterations,
    )


def with_lambda(spec: ProblemSpec, lam: float) -> ProblemSpec:
    return replace(spec, lam=lam)
