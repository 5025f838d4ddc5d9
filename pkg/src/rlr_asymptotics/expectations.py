"""Deterministic quadrature for expectations over the prior and Gaussian noise."""
from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .scalar import QuadratureRule, composite_normal_rule

PRIOR_KINDS = ("gaussian", "sparse")

# truncation of the kink-aligned axis; P(|Z| > 12) ~ 3.6e-33
KINK_DOMAIN = 12.0
KINK_PANELS = 12


@dataclass(frozen=True)
class PriorSpec:
    """Law of one entry of the true coefficient vector.

    ``gaussian``: N(0, kappa^2). ``sparse``: 0 with probability 1 - s,
    otherwise N(0, kappa^2 / s). Both have second moment kappa^2.
    """

    kind: str = "gaussian"
    kappa: float = 1.0
    sparsity: float = 1.0

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior {self.kind!r}; expected one of {PRIOR_KINDS}")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.sparsity <= 1:
            raise ValueError("sparsity must lie in (0, 1]")

    def components(self):
        """Mixture components as (probability, standard deviation) pairs."""
        if self.kind == "gaussian":
            return [(1.0, self.kappa)]
        s = self.sparsity
        comps = []
        if s < 1:
            comps.append((1.0 - s, 0.0))
        comps.append((s, self.kappa / np.sqrt(s)))
        return comps

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.kappa * rng.standard_normal(size)
        on = rng.random(size) < self.sparsity
        return np.where(on, (self.kappa / np.sqrt(self.sparsity)) * rng.standard_normal(size), 0.0)


@dataclass(frozen=True)
class LinearKinks:
    """Integrand kinks along the lines ``coef_beta * beta + coef_z * Z = offset``."""

    coef_beta: float
    coef_z: float
    offsets: tuple


def _kinked_grid(scale, kinks: LinearKinks, rule: QuadratureRule):
    """(beta, Z, weight) grid for beta ~ N(0, scale^2) aligned with the kinks.

    Rotates (beta, Z) to independent standard normals (A, U) with
    ``coef_beta * beta + coef_z * Z = s * A``. The A axis is integrated
    piecewise between the kinks (Gauss-Legendre, order/4 nodes per panel),
    the U axis by Gauss-Hermite.
    """
    a1, a2 = kinks.coef_beta, kinks.coef_z
    s = math.hypot(a1 * scale, a2)
    cuts = np.clip(np.asarray(kinks.offsets, dtype=float) / s, -KINK_DOMAIN, KINK_DOMAIN)
    breaks = np.sort(np.concatenate([np.linspace(-KINK_DOMAIN, KINK_DOMAIN, KINK_PANELS + 1), cuts]))
    a, wa = composite_normal_rule(breaks, max(2, rule.order // 4))
    if scale == 0.0:
        u, wu = np.zeros(1), np.ones(1)
    else:
        u, wu = rule.nodes, rule.weights
    a, u = a[:, None], u[None, :]
    beta = scale * (a1 * scale * a + a2 * u) / s
    z = (a2 * a - a1 * scale * u) / s
    return beta, z, np.outer(wa, wu)


def expect_prior_z(g, prior: PriorSpec, rule: QuadratureRule, kinks: LinearKinks | None = None):
    """E[g(beta, Z)] with beta ~ prior independent of Z ~ N(0, 1).

    ``g`` must broadcast over 2-D arrays; it may return a stack of shape
    (k, ...) to get k expectations from one pass. The point mass of a sparse
    prior is integrated exactly as its own mixture component. If ``g`` is
    only piecewise smooth with kinks along lines in the (beta, Z) plane, as
    happens under a soft threshold, pass them as ``kinks``; each Gaussian
    component is then integrated in coordinates aligned with those lines.
    """
    total = 0.0
    for prob, scale in prior.components():
        if kinks is not None and math.hypot(kinks.coef_beta * scale, kinks.coef_z) > 0:
            beta, z, w = _kinked_grid(scale, kinks, rule)
        elif scale == 0.0:
            beta, z, w = np.zeros((1, 1)), rule.nodes[None, :], rule.weights[None, :]
        else:
            beta = scale * rule.nodes[:, None]
            z = rule.nodes[None, :]
            w = np.outer(rule.weights, rule.weights)
        vals = g(beta, z)
        total = total + prob * np.sum(w * vals, axis=(-2, -1))
    return float(total) if np.ndim(total) == 0 else total


def tensor_z1z2(rule: QuadratureRule):
    """Tensor grid ``(Z1, Z2, W)`` for two independent standard normals."""
    z1, z2 = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    w = np.outer(rule.weights, rule.weights)
    return z1, z2, w


def expect_z1z2(g, rule: QuadratureRule) -> float:
    """E[g(Z1, Z2)] for independent standard normals by tensor Gauss-Hermite."""
    z1, z2, w = tensor_z1z2(rule)
    return float(np.sum(w * g(z1, z2)))
