"""Monte Carlo counterpart of the asymptotic predictions.

Draws Gaussian designs and logistic labels, fits the regularized
likelihood with FISTA and measures correlation, variance, MSE and support
recovery errors of each fit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .scalar import rho, rho_prime
from .solver import ProblemSpec, with_lambda

log = logging.getLogger(__name__)

METRICS = ("alpha_hat", "sigma2_hat", "mse_raw", "mse_debiased", "e1_hat", "e2_hat")

BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class FistaKnobs:
    tol: float = 1e-9
    max_iter: int = 20000
    backtrack: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    spec: ProblemSpec
    trials: int = 100
    master_seed: int = 0
    epsilon: float = 1e-3
    fista: FistaKnobs = field(default_factory=FistaKnobs)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n < 1:
            raise ValueError("n = round(delta * p) must be at least 1")

    @property
    def n(self) -> int:
        return int(round(self.spec.delta * self.p))


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    iterations: int
    converged: bool
    diverged: bool
    objective: float
    grad_map_norm: float


@dataclass(frozen=True)
class TrialResult:
    alpha_hat: float
    sigma2_hat: float
    mse_raw: float
    mse_debiased: float
    e1_hat: float
    e2_hat: float
    seed: int = 0
    optimizer_iters: int = 0
    objective_final: float = math.nan
    converged: bool = True
    support_defined: bool = True


def trial_seed(master_seed: int, index: int) -> int:
    """64-bit seed of trial ``index``, independent of execution order."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_instance(config: ExperimentConfig, seed: int):
    """Design ``X`` (n x p, rows N(0, I/p)), labels ``y`` and truth ``beta_star``."""
    rng = np.random.default_rng(seed)
    p, n = config.p, config.n
    beta_star = config.spec.prior.sample(rng, p)
    X = rng.standard_normal((n, p)) / math.sqrt(p)
    y = (rng.random(n) < rho_prime(X @ beta_star)).astype(float)
    return X, y, beta_star


def smooth_loss(X, y, beta) -> float:
    z = X @ beta
    return float(np.mean(rho(z) - y * z))


def smooth_grad(X, y, beta) -> np.ndarray:
    return X.T @ (rho_prime(X @ beta) - y) / X.shape[0]


def objective(X, y, beta, spec: ProblemSpec) -> float:
    p = X.shape[1]
    return smooth_loss(X, y, beta) + spec.lam / p * float(np.sum(spec.regularizer.value(beta)))


def _grad_map(X, y, beta, spec, step):
    thresh = step * spec.lam / X.shape[1]
    nxt = spec.regularizer.prox(beta - step * smooth_grad(X, y, beta), thresh)
    return float(np.linalg.norm(beta - nxt) / step)


def fit_rlr(X, y, spec: ProblemSpec, knobs: FistaKnobs = FistaKnobs(), beta0=None, lipschitz=None) -> FitResult:
    """Minimize mean logistic loss + (lambda / p) * f(beta) by FISTA.

    Backtracking halves the step until the quadratic upper bound holds;
    momentum restarts whenever it points against the last step. Stops when
    both the relative objective change and the norm of the prox-gradient
    mapping drop below ``knobs.tol``. Divergence of the iterates (no finite
    minimizer, e.g. separable data without penalty) is reported, not looped
    on.
    """
    n, p = X.shape
    if lipschitz is None:
        lipschitz = np.linalg.norm(X, 2) ** 2 / (4.0 * n)
    # rho'' <= 1/4 everywhere, and is much smaller away from the origin
    step = 4.0 / lipschitz
    lam_p = spec.lam / p
    prox = spec.regularizer.prox
    blowup = BLOWUP_FACTOR * spec.kappa * math.sqrt(p)
    signs = 2.0 * np.asarray(y, dtype=float) - 1.0

    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    yk = beta.copy()
    t = 1.0
    f_prev = objective(X, y, beta, spec)
    gm = math.inf
    for it in range(1, knobs.max_iter + 1):
        zy = X @ yk
        f_y = float(np.mean(rho(zy) - y * zy))
        g_y = X.T @ (rho_prime(zy) - y) / n
        while True:
            cand = prox(yk - step * g_y, step * lam_p)
            d = cand - yk
            zc = X @ cand
            f_c = float(np.mean(rho(zc) - y * zc))
            if f_c <= f_y + float(g_y @ d) + float(d @ d) / (2.0 * step) + 1e-15 * abs(f_y):
                break
            step *= knobs.backtrack
        gm_y = math.sqrt(float(d @ d)) / step
        F = f_c + lam_p * float(np.sum(spec.regularizer.value(cand)))
        if not np.all(np.isfinite(cand)) or np.linalg.norm(cand) > blowup:
            return FitResult(cand, it, False, True, F, math.inf)
        # without a penalty, an iterate that separates the labels certifies
        # that the infimum is approached only as |beta| -> infinity
        if lam_p == 0 and np.all(signs * zc > 0):
            return FitResult(cand, it, False, True, F, math.inf)
        # gradient-scheme adaptive restart
        if float((yk - cand) @ (cand - beta)) > 0:
            t = 1.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        yk = cand + ((t - 1.0) / t_next) * (cand - beta)
        rel = abs(F - f_prev) / max(1.0, abs(F))
        beta, t, f_prev = cand, t_next, F
        if gm_y < knobs.tol and rel < knobs.tol:
            gm = _grad_map(X, y, beta, spec, step)
            if gm < knobs.tol:
                return FitResult(beta, it, True, False, F, gm)
    gm = _grad_map(X, y, beta, spec, step)
    return FitResult(beta, knobs.max_iter, False, False, f_prev, gm)


def measure_trial(beta_hat, beta_star, epsilon: float = 1e-3, **extra) -> TrialResult:
    """Empirical correlation, variance, MSEs and support errors of one fit.

    e1_hat is the fraction of off-support coordinates with |beta_hat| > eps,
    e2_hat the fraction of support coordinates with |beta_hat| <= eps. A
    rate whose conditioning set is empty is NaN and ``support_defined`` is
    False when the support itself is empty.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    p = beta_star.size
    norm2 = float(beta_star @ beta_star)
    alpha = float(beta_hat @ beta_star) / norm2 if norm2 > 0 else math.nan
    resid = beta_hat - alpha * beta_star
    sigma2 = float(resid @ resid) / p
    mse = float(np.sum((beta_hat - beta_star) ** 2)) / p
    debiased = float(np.sum((beta_hat / alpha - beta_star) ** 2)) / p if alpha != 0 else math.inf
    on = beta_star != 0
    detected = np.abs(beta_hat) > epsilon
    e1 = float(np.mean(detected[~on])) if np.any(~on) else math.nan
    e2 = float(np.mean(~detected[on])) if np.any(on) else math.nan
    return TrialResult(alpha, sigma2, mse, debiased, e1, e2, support_defined=bool(np.any(on)), **extra)


def run_trial(config: ExperimentConfig, index: int, lambdas=None) -> list[TrialResult]:
    """One data draw, fitted at every lambda in ``lambdas`` (warm-started in order).

    With ``lambdas`` None only ``config.spec.lam`` is fitted.
    """
    seed = trial_seed(config.master_seed, index)
    X, y, beta_star = generate_instance(config, seed)
    lip = np.linalg.norm(X, 2) ** 2 / (4.0 * X.shape[0])
    lambdas = [config.spec.lam] if lambdas is None else list(lambdas)
    out = []
    beta0 = None
    for lam in lambdas:
        spec = with_lambda(config.spec, lam)
        fit = fit_rlr(X, y, spec, config.fista, beta0=beta0, lipschitz=lip)
        if fit.diverged:
            log.warning("trial %d, lambda %g: iterates diverged (no finite minimizer)", index, lam)
            beta0 = None
        else:
            beta0 = fit.beta
        res = measure_trial(
            fit.beta, beta_star, config.epsilon,
            seed=seed, optimizer_iters=fit.iterations, objective_final=fit.objective,
            converged=fit.converged,
        )
        out.append(res)
    return out


@dataclass(frozen=True)
class Aggregate:
    mean: dict
    se: dict
    trials_converged: int
    trials_failed: int
    rows: tuple


def aggregate(results) -> Aggregate:
    """Mean and standard error per metric over converged trials (in index order)."""
    rows = tuple(results)
    ok = [r for r in rows if r.converged]
    mean, se = {}, {}
    for m in METRICS:
        vals = np.array([getattr(r, m) for r in ok], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            mean[m], se[m] = math.nan, math.nan
            continue
        mean[m] = float(np.mean(vals))
        se[m] = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    return Aggregate(mean, se, len(ok), len(rows) - len(ok), rows)


def run_trials(config: ExperimentConfig, workers: int = 1) -> Aggregate:
    """All trials of ``config``; seeds come from ``master_seed`` by trial index."""
    indices = range(config.trials)
    if workers > 1 and config.trials > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_single, [config] * config.trials, indices))
    else:
        results = [_single(config, i) for i in indices]
    return aggregate(results)


def _single(config: ExperimentConfig, index: int) -> TrialResult:
    return run_trial(config, index)[0]


def trial_fields() -> list[str]:
    return [f.name for f in fields(TrialResult)]
