"""Scalar proximal operators and Moreau envelopes.

Conventions follow

    Prox_{t f}(x) = argmin_y  f(y) + (y - x)^2 / (2 t)
    M_f(x, t)     = min_y     f(y) + (y - x)^2 / (2 t)

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scalar import rho, rho_prime, rho_second

REGULARIZER_KINDS = ("none", "l1", "l2sq")

PROX_RHO_TOL = 1e-12
PROX_RHO_MAX_ITER = 100


class ProxConvergenceError(RuntimeError):
    """Newton/bisection for the link prox failed to reach tolerance."""


def prox_l1(x, t):
    """Soft threshold ``sign(x) * max(|x| - t, 0)``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox_l2sq(x, t):
    return np.asarray(x, dtype=float) / (1.0 + t)


def prox_none(x, t):
    return np.asarray(x, dtype=float) + 0.0 * np.asarray(t, dtype=float)


def prox_rho(x, t, z0=None):
    """Solve ``z + t * rho'(z) = x`` for z.

    The residual is strictly increasing in z and changes sign on
    ``[x - t, x]``, so Newton steps are accepted only while they stay inside
    the current bracket; otherwise the bracket is bisected.

    Parameters
    ----------
    x, t : array_like
        Prox argument and step (t >= 0); broadcast together.
    z0 : array_like, optional
        Warm start. Values outside the bracket are ignored.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("prox step t must be nonnegative")
    lo = x - t
    hi = x.copy()
    if z0 is None:
        z = x - t * rho_prime(x) / (1.0 + t * rho_second(x))
    else:
        z = np.broadcast_to(np.asarray(z0, dtype=float), x.shape).copy()
    z = np.where((z < lo) | (z > hi), 0.5 * (lo + hi), z)
    tol = PROX_RHO_TOL * np.maximum(1.0, np.abs(x))
    for _ in range(PROX_RHO_MAX_ITER):
        f = z + t * rho_prime(z) - x
        done = np.abs(f) <= tol
        if np.all(done):
            return z[()] if z.ndim == 0 else z
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        step = z - f / (1.0 + t * rho_second(z))
        outside = (step <= lo) | (step >= hi)
        z = np.where(done, z, np.where(outside, 0.5 * (lo + hi), step))
        # bracket collapsed to floating-point resolution
        collapsed = (hi - lo) <= 4 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        if np.all(done | collapsed):
            return z[()] if z.ndim == 0 else z
    raise ProxConvergenceError(
        f"prox of the logistic link did not converge in {PROX_RHO_MAX_ITER} iterations"
    )


def prox_rho_derivative(x, t, z=None):
    """d/dx Prox_{t rho}(x) = 1 / (1 + t rho''(Prox_{t rho}(x)))."""
    if z is None:
        z = prox_rho(x, t)
    return 1.0 / (1.0 + np.asarray(t, dtype=float) * rho_second(z))


@dataclass(frozen=True)
class RegularizerSpec:
    """Separable penalty f(w) = sum_i f~(w_i).

    ``l1``: f~ = |.|, ``l2sq``: f~ = (.)^2 / 2, ``none``: f~ = 0.
    """

    kind: str = "l2sq"

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise ValueError(f"unknown regularizer {self.kind!r}; expected one of {REGULARIZER_KINDS}")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "l1":
            return np.abs(x)
        if self.kind == "l2sq":
            return 0.5 * x * x
        return np.zeros_like(x)

    def prox(self, x, t):
        if self.kind == "l1":
            return prox_l1(x, t)
        if self.kind == "l2sq":
            return prox_l2sq(x, t)
        return prox_none(x, t)

    def breakpoints(self, t):
        """Arguments at which ``prox(., t)`` is not differentiable."""
        if self.kind == "l1":
            t = np.asarray(t, dtype=float)
            return np.stack([-t, t], axis=-1)
        return None


RHO = "rho"


def moreau_envelope(f, x, t):
    """Moreau envelope ``f(p) + (x - p)^2 / (2 t)`` at ``p = Prox_{t f}(x)``.

    ``f`` is a :class:`RegularizerSpec` or the string ``"rho"`` for the
    logistic link.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Moreau envelope needs t > 0")
    x = np.asarray(x, dtype=float)
    if isinstance(f, str):
        if f != RHO:
            raise ValueError(f"unknown function {f!r}")
        p = prox_rho(x, t)
        return rho(p) + (x - p) ** 2 / (2.0 * t)
    p = f.prox(x, t)
    return f.value(p) + (x - p) ** 2 / (2.0 * t)
