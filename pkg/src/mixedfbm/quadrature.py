"""Quadrature rules for power-law endpoint singularities on [0, 1].

The kernel integrands have fixed algebraic weights (1-y)^A y^B with
A, B in (-1, 0], plus mild additional power behavior of the smooth factor
near the endpoints whose exponent moves with the Hurst indices.  A single
global Gauss-Jacobi rule resolves the explicit weight but converges slowly
on the extra endpoint behavior, so the workhorse here is a composite rule
on a dyadically graded partition: Gauss-Legendre on interior cells (where
the full integrand is smooth) and one-sided Gauss-Jacobi end cells that
carry the explicit weight exactly.  Geometric grading makes the per-cell
error self-similar, i.e. the rule resolves all scales down to the end-cell
width.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = ["jacobi_rule_01", "legendre_rule_01", "CompositeRule", "composite_rule_01"]


@lru_cache(maxsize=256)
def _roots_jacobi_cached(n: int, alpha: float, beta: float):
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


@lru_cache(maxsize=64)
def _roots_legendre_cached(n: int):
    x, w = roots_legendre(n)
    return x, w


def jacobi_rule_01(n: int, alpha: float, beta: float):
    """Nodes/weights on [0,1] for integrals of (1-y)^alpha * y^beta * f(y).

    Returns (y, w) with sum(w * f(y)) approximating the weighted integral;
    the weight itself must not be included in f.
    """
    x, w = _roots_jacobi_cached(n, alpha, beta)
    y = 0.5 * (x + 1.0)
    return y, w * 2.0 ** (-(alpha + beta + 1.0))


def legendre_rule_01(n: int):
    """Plain Gauss-Legendre nodes/weights on [0,1]."""
    x, w = _roots_legendre_cached(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class CompositeRule:
    """Flattened composite rule: integral ~ sum(weights * f(nodes)).

    Weights already include the algebraic factor (1-y)^A y^B, so f is
    only the remaining (continuous) part of the integrand.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=128)
def composite_rule_01(
    a_end: float,
    b_end: float,
    depth: int = 44,
    n_cell: int = 12,
    n_end: int = 16,
) -> CompositeRule:
    """Composite rule for int_0^1 (1-y)^a_end y^b_end f(y) dy, f continuous.

    Dyadic cells [2^-(m+1), 2^-m] (and mirrored toward 1) use Gauss-Legendre
    with the weight folded into the quadrature weights; the two end cells of
    width 2^-depth use one-sided Gauss-Jacobi rules matched to the weight
    exponent at that end, so the truncation error of the grading vanishes.
    Handles mild extra power behavior of f at either endpoint through the
    grading alone.
    """
    if not (-1 < a_end <= 0 and -1 < b_end <= 0):
        raise ValueError(f"weight exponents must lie in (-1, 0], got ({a_end}, {b_end})")
    nodes = []
    weights = []

    # interior dyadic cells, both halves
    yl, wl = _roots_legendre_cached(n_cell)
    ref = 0.5 * (yl + 1.0)
    for m in range(1, depth):
        lo, hi = 2.0 ** -(m + 1), 2.0 ** -m
        width = hi - lo
        for start in (lo, 1.0 - hi):  # cell near 0 and its mirror near 1
            y = start + width * ref
            w = 0.5 * wl * width * (1.0 - y) ** a_end * y**b_end
            nodes.append(y)
            weights.append(w)

    # end cells with exact one-sided Jacobi weights
    eps = 2.0 ** -depth
    yj, wj = jacobi_rule_01(n_end, 0.0, b_end)  # weight y^b_end near 0
    y0 = eps * yj
    w0 = wj * eps ** (b_end + 1.0) * (1.0 - y0) ** a_end
    nodes.append(y0)
    weights.append(w0)

    yj1, wj1 = jacobi_rule_01(n_end, a_end, 0.0)  # weight (1-y)^a_end near 1
    y1 = 1.0 - eps + eps * yj1
    w1 = wj1 * eps ** (a_end + 1.0) * y1**b_end
    nodes.append(y1)
    weights.append(w1)

    y = np.concatenate(nodes)
    w = np.concatenate(weights)
    order = np.argsort(y)
    return CompositeRule(nodes=y[order], weights=w[order])
