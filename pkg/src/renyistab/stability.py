"""Bound functions, accept/reject thresholds and the undecidable gap.

``f_p(k)`` is the coefficient multiplying ``eps0 * |alpha_x|^2`` for a
weight-k direction in the second-order entropy excess of a state near a
product state. The accept threshold is ``f_p(2)`` and the reject threshold
is ``sup_k f_p(k) = p/(p-1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .channel import DepolarizingParams
from .core import PreconditionError

VARIANTS = ("canonical", "as-printed")


def _ratio_expm1(x: float, p: float, log_r: float) -> float:
    """(1 - r^(-x(p-1))) / (1 - r^(-x)), with the x -> 0 limit p - 1."""
    if x == 0:
        return p - 1.0
    return math.expm1(-x * (p - 1.0) * log_r) / math.expm1(-x * log_r)


def _power_quotient(x: float, p: float, r: float) -> tuple[float, float]:
    """((r^x)^(p-1) - 1) / (r^x - 1) as (log of the leading factor, bounded ratio).

    Factoring out r^(x(p-2)) keeps the quotient finite for large x.
    """
    log_r = math.log(r)
    return x * (p - 2.0) * log_r, _ratio_expm1(x, p, log_r)


def f_p(x: float, params: DepolarizingParams, p: float, variant: str = "canonical") -> float:
    """Second-order excess coefficient for a Hamming-weight-``x`` direction.

    canonical::

        p/(1-p) [ ((a^x)^(p-1) - (b^x)^(p-1))/(a^x - b^x) (lam^2/(a^p+(d-1)b^p))^x
                  + ((a^(p-1) b + a b^(p-1) + (d-2) b^p)/(a^p+(d-1)b^p))^x - 1 ]

    ``"as-printed"`` is the r = a/b form with the extra ``(d+r-1)^(-2x)`` in
    the first term. Only the canonical variant matches the exact entropy
    expansion; the other is kept so the two can be compared side by side.

    Requires 0 < lam < 1 and p > 1 (use :func:`f_vn` at p = 1).
    """
    params.require_interior()
    if not p > 1:
        raise PreconditionError(f"f_p needs p > 1, got p={p}; use f_vn for p = 1")
    if variant not in VARIANTS:
        raise PreconditionError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if x < 0:
        raise PreconditionError(f"x must be >= 0, got {x}")
    d, r = params.d, params.r
    log_scale, ratio = _power_quotient(x, p, r)
    # ((r-1)^2 / (r^p + d - 1))^x, in logs
    log_base = 2.0 * math.log(r - 1.0) - p * math.log(r) - math.log1p((d - 1.0) * r**-p)
    log_first = log_scale + x * log_base
    if variant == "as-printed":
        log_first -= 2.0 * x * math.log(d + r - 1.0)
    first = ratio * math.exp(log_first)
    # (r^(p-1) + r + d - 2) / (r^p + d - 1), divided through by r^p
    q = (1.0 / r + r ** (1.0 - p) + (d - 2.0) * r**-p) / (1.0 + (d - 1.0) * r**-p)
    second = q**x
    return p / (1.0 - p) * (first + second - 1.0)


def f_vn(x: float, params: DepolarizingParams) -> float:
    """p = 1 counterpart of :func:`f_p` (natural logs).

    ``x (a-b) ln(a/b) - (a-b)^(2x) (ln a^x - ln b^x) / (a^x - b^x)``; the x -> 0
    value is -1.
    """
    params.require_interior()
    if x < 0:
        raise PreconditionError(f"x must be >= 0, got {x}")
    a, b = params.a, params.b
    log_r = math.log(a / b)
    lam = a - b
    first = x * lam * log_r
    if x == 0:
        return -1.0
    # (a-b)^(2x) x ln r / (a^x (1 - r^-x))
    second = math.exp(x * (2 * math.log(lam) - math.log(a))) * x * log_r / -math.expm1(-x * log_r)
    return first - second


def excess_coefficient(x: float, params: DepolarizingParams, p: float) -> float:
    """Canonical f_p, or f_vn at p = 1."""
    return f_vn(x, params) if p == 1 else f_p(x, params, p)


def accept_coeff(params: DepolarizingParams, p: float) -> float:
    """Coefficient of eps below which the output entropy certifies a near-product input.

    ``2 p/(p-1) (r-1)/(r+1) (r^(p-1)-1)(2r^p+dr+d-2)/(r^p+d-1)^2``, evaluated
    after dividing numerator and denominator by r^(2p).
    """
    params.require_interior()
    if not p > 1:
        raise PreconditionError(f"accept_coeff needs p > 1, got p={p}")
    d, r = params.d, params.r
    u = r**-p
    core = (1.0 / r - u) * (2.0 + (d * r + d - 2.0) * u) / (1.0 + (d - 1.0) * u) ** 2
    return 2.0 * p / (p - 1.0) * (r - 1.0) / (r + 1.0) * core


def reject_coeff(p: float) -> float:
    """p/(p-1), the supremum of f_p over weights."""
    if p == 1:
        raise PreconditionError("reject coefficient p/(p-1) is undefined at p = 1")
    if not p > 1:
        raise PreconditionError(f"reject_coeff needs p > 1, got p={p}")
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def gap(p: float, params: DepolarizingParams) -> float:
    """Width of the undecidable band, from its own closed form."""
    params.require_interior()
    if not p > 1:
        raise PreconditionError(f"gap needs p > 1, got p={p}")
    d, r = params.d, params.r
    u = r**-p
    frac = 2.0 * (r - 1.0) * (1.0 / r - u) * (2.0 + (d * r + d - 2.0) * u) / ((r + 1.0) * (1.0 + (d - 1.0) * u) ** 2)
    return p / (p - 1.0) * (1.0 - frac)


def gap_limit(params: DepolarizingParams) -> float:
    """lim_{p -> inf} gap(p) = (r^2 - 3r + 4) / (r (r + 1))."""
    params.require_interior()
    r = params.r
    return (r * r - 3.0 * r + 4.0) / (r * (r + 1.0))


def h_poly(r: float, d: int) -> float:
    """r^3 - 3r^2 + (10 - 2d) r + (14d - 10)."""
    return r**3 - 3.0 * r**2 + (10.0 - 2.0 * d) * r + (14.0 * d - 10.0)


def h_critical_point(d: int) -> float:
    """Local minimizer 1 + sqrt(6d - 21)/3 of h on r > 1 (exists for d >= 4)."""
    if d < 4:
        raise PreconditionError("h has no critical point in r > 1 for d < 4")
    return 1.0 + math.sqrt(6.0 * d - 21.0) / 3.0


def h_critical_value_printed(d: int) -> float:
    """The closed form 2 sqrt(6d-21)/3 - 2 + 12d quoted for h at its critical point.

    It overstates the true value; see :func:`h_critical_value`.
    """
    if d < 4:
        raise PreconditionError("critical value only defined for d >= 4")
    return 2.0 * math.sqrt(6.0 * d - 21.0) / 3.0 - 2.0 + 12.0 * d


def h_critical_value(d: int) -> float:
    """h at its critical point, simplified: 12d - 2 - (2/9)(2d - 7) sqrt(6d - 21)."""
    if d < 4:
        raise PreconditionError("critical value only defined for d >= 4")
    return 12.0 * d - 2.0 - 2.0 / 9.0 * (2.0 * d - 7.0) * math.sqrt(6.0 * d - 21.0)


@dataclass(frozen=True)
class HScan:
    d: int
    grid_min: float
    argmin: float
    critical_value: float | None


def h_min_check(d: int, r_max: float = 100.0, points: int = 200_001) -> HScan:
    """Minimum of h over a dense grid on (1, r_max], plus the analytic critical value for d >= 4."""
    r = np.linspace(1.0, r_max, points)[1:]
    vals = h_poly(r, d)
    i = int(np.argmin(vals))
    crit = h_poly(h_critical_point(d), d) if d >= 4 else None
    return HScan(d, float(vals[i]), float(r[i]), crit)


@dataclass(frozen=True)
class MonotonicityScan:
    worst: float
    at: int


def monotonicity_scan(params: DepolarizingParams, p: float, x_max: int = 50) -> MonotonicityScan:
    """Smallest forward difference f(x+1) - f(x) over integer x in [2, x_max - 1].

    Uses f_vn at p = 1 and the canonical f_p otherwise.
    """
    if x_max < 3:
        raise PreconditionError("x_max must be >= 3")
    vals = [excess_coefficient(x, params, p) for x in range(2, x_max + 1)]
    diffs = np.diff(vals)
    i = int(np.argmin(diffs))
    return MonotonicityScan(float(diffs[i]), i + 2)


def predicted_excess(weights: Mapping[int, float], eps0: float, params: DepolarizingParams, p: float) -> float:
    """eps0 * sum_k w_k f_p(k): the leading-order entropy excess over the minimum."""
    if weights.get(0, 0.0) > 1e-12:
        raise PreconditionError("direction has weight on |0...0>; it must be orthogonal to the anchor")
    if eps0 == 0:
        return 0.0
    return eps0 * sum(w * excess_coefficient(k, params, p) for k, w in weights.items() if k > 0)


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    UNDECIDED = "undecided"
    REJECT = "reject"


@dataclass(frozen=True)
class StabilityThresholds:
    """Leading-order accept/reject coefficients of eps for one parameter point.

    At p = 1 there is no reject threshold; ``reject_coeff`` and ``gap`` are
    ``inf`` and the classifier never rejects.
    """

    params: DepolarizingParams
    p: float
    accept_coeff: float
    reject_coeff: float
    gap: float

    @classmethod
    def compute(cls, params: DepolarizingParams, p: float) -> "StabilityThresholds":
        if p == 1:
            acc = f_vn(2, params)
            return cls(params, 1.0, acc, math.inf, math.inf)
        if not p > 1:
            raise PreconditionError(f"thresholds need p >= 1, got p={p}")
        return cls(params, float(p), accept_coeff(params, p), reject_coeff(p), gap(p, params))


def classify(s_value: float, eps: float, thresholds: StabilityThresholds, s_min: float) -> Verdict:
    """Accept iff S < S_min + eps*accept; reject iff S >= S_min + eps*reject; otherwise undecided.

    Correction terms of order eps^(3/2) are dropped.
    """
    excess = s_value - s_min
    if excess >= eps * thresholds.reject_coeff:
        return Verdict.REJECT
    if excess < eps * thresholds.accept_coeff:
        return Verdict.ACCEPT
    return Verdict.UNDECIDED
