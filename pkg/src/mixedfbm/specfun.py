"""Gamma, Beta, and Gauss hypergeometric evaluations on the ranges the kernel needs.

The hypergeometric function is taken in its Euler-integral sense,

    F(a, b, c; x) = 1/B(b, c-b) * int_0^1 t^(b-1) (1-t)^(c-b-1) (1-x t)^(-a) dt,

which requires c > b > 0 and x < 1, or x = 1 with c - a - b > 0 (the integral
then converges and equals Gamma(c)Gamma(c-a-b) / (Gamma(c-a)Gamma(c-b))).
Evaluation is delegated to scipy.special; the test suite checks it against
direct adaptive quadrature of the integral representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special as sp

from .errors import DivergenceError, DomainError

__all__ = [
    "HypergeometricArgs",
    "HypBoundReport",
    "gamma_fn",
    "beta_fn",
    "hyp2f1",
    "check_hyp_bounds",
]


def gamma_fn(x: float) -> float:
    """Gamma function for x > 0."""
    if not x > 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    return float(sp.gamma(x))


def beta_fn(a: float, b: float) -> float:
    """Beta function B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b) for a, b > 0."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta_fn requires a, b > 0, got ({a}, {b})")
    return float(sp.beta(a, b))


@dataclass(frozen=True)
class HypergeometricArgs:
    """Validated parameter set (a, b, c; x) for the Euler-integral form."""

    a: float
    b: float
    c: float
    x: float

    def __post_init__(self) -> None:
        if not (self.c > self.b > 0):
            raise DomainError(
                f"hypergeometric integral form requires c > b > 0, got b={self.b}, c={self.c}"
            )
        if self.x > 1:
            raise DomainError(f"hypergeometric argument must satisfy x <= 1, got x={self.x}")
        if self.x == 1 and not (self.c - self.a - self.b > 0):
            raise DivergenceError(
                f"F(a,b,c;1) diverges for c-a-b = {self.c - self.a - self.b} <= 0"
            )


def hyp2f1(args: HypergeometricArgs) -> float:
    """Gauss hypergeometric function at validated arguments.

    Returns exactly 1.0 when a = 0 or x = 0.
    """
    if args.a == 0.0 or args.x == 0.0:
        return 1.0
    return float(sp.hyp2f1(args.a, args.b, args.c, args.x))


@dataclass(frozen=True)
class HypBoundReport:
    """Outcome of one closed-form upper-bound check on F."""

    case: str
    f_value: float
    bound_value: float
    holds: bool


_HOLDS_SLACK = 1e-12


def check_hyp_bounds(a: float, b: float, c: float, x: float, case: str) -> HypBoundReport:
    """Check a closed-form upper bound on the hypergeometric function.

    case "i"  : for c > b > 1, x >= 0, 0 < a <= 1, bound F(a, b, c; -x) by
                (1 + x(b-1)/(c-1))^(-a).
    case "ii" : for 0 < a <= 1, b > 0, c - b > 1, x in (0, 1), bound
                F(a, b, c; x) by (1 - x b/(c-1))^(-a).

    The bounds are strict for x > 0 and collapse to equality at x = 0.
    """
    if not (0 < a <= 1):
        raise DomainError(f"bound checks require 0 < a <= 1, got a={a}")
    if case == "i":
        if not (c > b > 1):
            raise DomainError(f"case (i) requires c > b > 1, got b={b}, c={c}")
        if x < 0:
            raise DomainError(f"case (i) requires x >= 0, got x={x}")
        f_value = hyp2f1(HypergeometricArgs(a, b, c, -x))
        bound = (1.0 + x * (b - 1.0) / (c - 1.0)) ** (-a)
    elif case == "ii":
        if not (b > 0 and c - b > 1):
            raise DomainError(f"case (ii) requires b > 0 and c - b > 1, got b={b}, c={c}")
        if not (0 < x < 1):
            raise DomainError(f"case (ii) requires x in (0, 1), got x={x}")
        f_value = hyp2f1(HypergeometricArgs(a, b, c, x))
        bound = (1.0 - x * b / (c - 1.0)) ** (-a)
    else:
        raise DomainError(f"unknown bound case {case!r}, expected 'i' or 'ii'")
    holds = f_value <= bound * (1.0 + _HOLDS_SLACK) + _HOLDS_SLACK
    return HypBoundReport(case=case, f_value=float(f_value), bound_value=float(bound), holds=bool(holds))


def hyp2f1_raw(a, b, c, x):
    """Vectorized, unvalidated 2F1 for internal hot paths (parameters known valid)."""
    return sp.hyp2f1(a, b, c, x)
