"""Divided-difference perturbation calculus for matrix functions.

For a diagonal ``A = diag(p_1..p_m)`` and a direction ``B``::

    f(A + tB) = f(A) + t L_A(B) + t^2 Q_A(B) + O(t^3)
    [L_A(B)]_ij = Δf(p_i, p_j) b_ij
    [Q_A(B)]_ij = sum_k Δ²f(p_i, p_k, p_j) b_ik b_kj

and the second-order Taylor coefficient of the Rényi entropy along
``rho(t) = rho + t*gamma0 + t^2*gamma1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import DepolarizingParams, depolarize_operator
from .core import PreconditionError, PureState, SeedLike, as_generator, hermitian_function
from .entropy import renyi_entropy

# Points closer than CONFLUENCE_REL * max(|x|, 1e-300) are treated as
# coincident and handled by a Taylor expansion about their mean.
CONFLUENCE_REL = 1e-4
RESIDUAL_FLOOR = 1e-13


@dataclass(frozen=True)
class ScalarFunction:
    """A smooth scalar function with analytic derivatives.

    ``deriv(x, k)`` returns the k-th derivative (k = 0 is the function
    itself); orders up to 5 are needed by the confluent expansions.
    """

    name: str
    deriv: Callable[[np.ndarray, int], np.ndarray]
    domain: tuple[float, float] = (0.0, math.inf)
    shift: int = 0

    def __call__(self, x):
        return self.deriv(np.asarray(x, dtype=float), self.shift)

    def nth(self, x, k: int):
        return self.deriv(np.asarray(x, dtype=float), self.shift + k)

    def derivative(self) -> "ScalarFunction":
        return ScalarFunction(self.name + "'", self.deriv, self.domain, self.shift + 1)

    def check_domain(self, x) -> None:
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if x.size and (np.any(x <= lo) or np.any(x >= hi)):
            raise PreconditionError(
                f"{self.name}: arguments outside the open interval ({lo}, {hi}); "
                f"min={x.min():.3e}, max={x.max():.3e}"
            )


def power_function(p: float) -> ScalarFunction:
    """x -> x**p on (0, inf)."""

    def deriv(x, k):
        coef = 1.0
        for j in range(k):
            coef *= p - j
        return coef * x ** (p - k)

    return ScalarFunction(f"x^{p:g}", deriv)


def xlogx() -> ScalarFunction:
    """x -> x ln x, the von Neumann integrand."""

    def deriv(x, k):
        if k == 0:
            return x * np.log(x)
        if k == 1:
            return np.log(x) + 1.0
        # k >= 2: (-1)^k (k-2)! / x^(k-1)
        return (-1.0) ** k * math.factorial(k - 2) / x ** (k - 1)

    return ScalarFunction("x ln x", deriv)


def identity_function() -> ScalarFunction:
    def deriv(x, k):
        if k == 0:
            return x.copy()
        return np.ones_like(x) if k == 1 else np.zeros_like(x)

    return ScalarFunction("x", deriv, domain=(-math.inf, math.inf))


def _close(x, y):
    scale = np.maximum(np.maximum(np.abs(x), np.abs(y)), 1e-300)
    return np.abs(x - y) <= CONFLUENCE_REL * scale


def divided_diff(f: ScalarFunction, x, y):
    """Δf(x, y) = (f(x) - f(y)) / (x - y), with the confluent limit f'(x) at x = y.

    Broadcasts over array arguments. Nearly coincident points use
    f'(m) + f'''(m) h²/24 + f⁽⁵⁾(m) h⁴/1920 about the midpoint m.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    f.check_domain(x)
    f.check_domain(y)
    near = _close(x, y)
    m = 0.5 * (x + y)
    h2 = (x - y) ** 2
    taylor = f.nth(m, 1) + f.nth(m, 3) * h2 / 24.0 + f.nth(m, 5) * h2**2 / 1920.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (f(x) - f(y)) / (x - y)
    out = np.where(near, taylor, direct)
    return out[()] if out.ndim == 0 else out


def second_divided_diff(f: ScalarFunction, x, y, z):
    """Δ²f(x, y, z), fully symmetric, with confluent limits (f''/2 when all coincide).

    The arguments are sorted first so the value is exactly permutation
    invariant. A cluster of three nearly coincident points is expanded about
    its mean: f''/2 + f⁽⁴⁾ h₂/24 + f⁽⁵⁾ h₃/120, h_k being the complete
    homogeneous symmetric polynomials of the offsets.
    """
    pts = np.sort(np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))), axis=0)
    lo, mid, hi = pts
    for v in pts:
        f.check_domain(v)
    cluster = _close(lo, hi)
    m = (lo + mid + hi) / 3.0
    u, v, w = lo - m, mid - m, hi - m
    # offsets sum to zero, so h1 = 0, h2 = -e2 and h3 = e3
    h2 = -(u * v + v * w + u * w)
    h3 = u * v * w
    taylor = f.nth(m, 2) / 2.0 + f.nth(m, 4) * h2 / 24.0 + f.nth(m, 5) * h3 / 120.0
    with np.errstate(divide="ignore", invalid="ignore"):
        spread = (divided_diff(f, mid, hi) - divided_diff(f, lo, mid)) / (hi - lo)
    out = np.where(cluster, taylor, spread)
    return out[()] if out.ndim == 0 else out


def _diag_of(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim == 1:
        return a.astype(float)
    if a.ndim == 2 and a.shape[0] == a.shape[1]:
        off = a - np.diag(np.diag(a))
        if np.max(np.abs(off), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
            raise PreconditionError("A must be diagonal")
        diag = np.diag(a)
        if np.max(np.abs(diag.imag), initial=0.0) > 1e-12:
            raise PreconditionError("A must have a real diagonal")
        return diag.real.astype(float)
    raise PreconditionError(f"A must be a diagonal matrix or a vector, got shape {a.shape}")


def _check_pair(p: np.ndarray, b) -> np.ndarray:
    b = np.asarray(b, dtype=complex)
    if b.shape != (p.size, p.size):
        raise PreconditionError(f"dimension mismatch: A has side {p.size}, B has shape {b.shape}")
    return b


def apply_L(a, b, f: ScalarFunction) -> np.ndarray:
    """First-order term: [L_A(B)]_ij = Δf(p_i, p_j) b_ij."""
    p = _diag_of(a)
    b = _check_pair(p, b)
    return divided_diff(f, p[:, None], p[None, :]) * b


def apply_Q(a, b, f: ScalarFunction) -> np.ndarray:
    """Second-order term: [Q_A(B)]_ij = sum_k Δ²f(p_i, p_k, p_j) b_ik b_kj."""
    p = _diag_of(a)
    b = _check_pair(p, b)
    d2 = second_divided_diff(f, p[:, None, None], p[None, :, None], p[None, None, :])  # [i, k, j]
    return np.einsum("ikj,ik,kj->ij", d2, b, b)


def trace_L(a, b, f: ScalarFunction) -> float:
    p = _diag_of(a)
    b = _check_pair(p, b)
    return float(np.real(np.sum(f.nth(p, 1) * np.diag(b))))


def trace_Q(a, b, f: ScalarFunction) -> float:
    """Tr Q_A(B) = sum_ij (f'(p_i) - f'(p_j)) / (2 (p_i - p_j)) b_ij b_ji."""
    p = _diag_of(a)
    b = _check_pair(p, b)
    half_dd = 0.5 * divided_diff(f.derivative(), p[:, None], p[None, :])
    return float(np.real(np.sum(half_dd * b * b.T)))


@dataclass(frozen=True)
class PerturbationFamily:
    """rho(t) = rho + t*gamma0 + t^2*gamma1 around a diagonal, nonsingular rho.

    ``rho`` holds the diagonal only. ``gamma0`` must be Hermitian with zero
    diagonal and ``gamma1`` Hermitian and traceless.
    """

    rho: np.ndarray
    gamma0: np.ndarray
    gamma1: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        rho = _diag_of(self.rho)
        if np.any(rho <= 0):
            raise PreconditionError(
                f"rho must be nonsingular (min eigenvalue {rho.min():.3e}); the expansion needs a strictly positive spectrum"
            )
        if abs(rho.sum() - 1.0) > 1e-10:
            raise PreconditionError(f"rho must have unit trace, got {rho.sum():.15g}")
        g0 = _check_pair(rho, self.gamma0)
        g1 = _check_pair(rho, self.gamma1)
        for name, g in (("gamma0", g0), ("gamma1", g1)):
            if np.max(np.abs(g - g.conj().T)) > 1e-10:
                raise PreconditionError(f"{name} must be Hermitian")
        if np.max(np.abs(np.diag(g0))) > 1e-12:
            raise PreconditionError("gamma0 must have zero diagonal")
        if abs(np.trace(g1)) > 1e-12:
            raise PreconditionError(f"gamma1 must be traceless, got trace {np.trace(g1):.3e}")
        for name, v in (("rho", rho), ("gamma0", g0), ("gamma1", g1)):
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def side(self) -> int:
        return self.rho.size

    def at(self, t: float) -> np.ndarray:
        return np.diag(self.rho).astype(complex) + t * self.gamma0 + t * t * self.gamma1


def stability_family(params: DepolarizingParams, phi_perp: PureState) -> PerturbationFamily:
    """Family obtained by pushing sqrt(1-eps)|0..0> + sqrt(eps)|phi> through the channel.

    rho = D(|0><0|), gamma0 = D(|0><phi| + |phi><0|), gamma1 = D(|phi><phi| - |0><0|),
    with t = sqrt(eps).
    """
    if (phi_perp.d, phi_perp.n) != (params.d, params.n):
        raise PreconditionError("phi_perp register does not match the channel")
    if abs(phi_perp.amplitudes[0]) > 1e-12:
        raise PreconditionError("phi_perp must be orthogonal to |0...0>")
    if params.lam >= 1.0:
        raise PreconditionError("lambda = 1 gives a singular rho; the expansion needs lambda < 1")
    dim = params.d**params.n
    zero = np.zeros(dim, dtype=complex)
    zero[0] = 1.0
    phi = phi_perp.amplitudes
    rho_full = depolarize_operator(params, np.outer(zero, zero))
    g0 = depolarize_operator(params, np.outer(zero, phi.conj()) + np.outer(phi, zero))
    g1 = depolarize_operator(params, np.outer(phi, phi.conj()) - np.outer(zero, zero))
    off = rho_full - np.diag(np.diag(rho_full))
    assert np.max(np.abs(off)) < 1e-14, "D(|0><0|) must be diagonal"
    return PerturbationFamily(np.diag(rho_full).real, g0, g1, label=f"stability(d={params.d},n={params.n},lam={params.lam:g})")


def random_family(
    side: int,
    seed: SeedLike = None,
    spread: float = 0.5,
    strength: float = 0.05,
    coupling: float = 1.0,
    noise: float = 0.3,
) -> PerturbationFamily:
    """Random diagonal rho with a hollow gamma0 and a traceless gamma1.

    ``rho`` is uniform up to a relative jitter of ``spread``. ``gamma0`` is a
    random hollow Hermitian matrix scaled so that ``||0.1 * gamma0||`` equals
    ``strength * min(rho)``; ``gamma1 = coupling * gamma0 + R`` with ``R`` a
    random traceless Hermitian matrix of norm ``noise * ||gamma0||``.

    The ``coupling`` term makes the cubic remainder coefficient carry a
    sign-coherent contribution; without it the t^3 term is a random-sign sum
    that the coherent t^4 term can overtake before t = 0.1.
    """
    if side < 2:
        raise PreconditionError("side must be >= 2")
    rng = as_generator(seed)
    w = 1.0 + spread * rng.uniform(-1.0, 1.0, side)
    rho = w / w.sum()

    def herm():
        g = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
        return 0.5 * (g + g.conj().T)

    g0 = herm()
    np.fill_diagonal(g0, 0.0)
    g0 *= strength * rho.min() / (0.1 * np.linalg.norm(g0, 2))
    extra = herm()
    extra -= np.trace(extra) / side * np.eye(side)
    extra *= noise * np.linalg.norm(g0, 2) / np.linalg.norm(extra, 2)
    return PerturbationFamily(rho, g0, coupling * g0 + extra, label=f"random(side={side})")


def renyi_second_order_coeff(fam: PerturbationFamily, p: float) -> float:
    """Exact t² coefficient of S_p(rho(t)) (natural log).

    ``(1/(1-p)) (p Tr(rho^(p-1) gamma1) + Tr Q_rho(gamma0)) / Tr rho^p`` with
    ``f = x^p`` in Q; at p = 1 the von Neumann analogue
    ``-(Tr(ln(rho) gamma1) + Tr Q_rho(gamma0))`` with ``f = x ln x``.
    """
    if not p > 0:
        raise PreconditionError(f"Rényi order must be positive, got p={p}")
    rho = fam.rho
    g1_diag = np.real(np.diag(fam.gamma1))
    if p == 1:
        return -float(np.sum(np.log(rho) * g1_diag) + trace_Q(rho, fam.gamma0, xlogx()))
    tr_p = float(np.sum(rho**p))
    linear = p * float(np.sum(rho ** (p - 1) * g1_diag))
    quad = trace_Q(rho, fam.gamma0, power_function(p))
    return (linear + quad) / tr_p / (1.0 - p)


def finite_difference_coeff(fam: PerturbationFamily, p: float, t: float = 1e-4) -> float:
    """(S_p(rho(t)) - S_p(rho)) / t², the brute-force estimate of the t² coefficient."""
    s0 = renyi_entropy(fam.rho, p)
    return (renyi_entropy(fam.at(t), p) - s0) / t**2


@dataclass(frozen=True)
class ResidualFit:
    """Log-log fit of the Taylor remainder; ``slope`` is None when ``exact``."""

    slope: float | None
    exact: bool
    t: tuple[float, ...]
    residuals: tuple[float, ...]


def fit_loglog_slope(t: Sequence[float], residuals: Sequence[float], floor: float = RESIDUAL_FLOOR) -> ResidualFit:
    t = np.asarray(t, dtype=float)
    res = np.abs(np.asarray(residuals, dtype=float))
    keep = res > floor
    if keep.sum() < 2:
        return ResidualFit(None, True, tuple(t), tuple(res))
    slope = float(np.polyfit(np.log(t[keep]), np.log(res[keep]), 1)[0])
    return ResidualFit(slope, False, tuple(t), tuple(res))


DEFAULT_T_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


def taylor_residual_check(fam: PerturbationFamily, p: float, t_grid: Sequence[float] = DEFAULT_T_GRID) -> ResidualFit:
    """Fit the decay exponent of |S_p(rho(t)) - S_p(rho) - t² coeff| over ``t_grid``.

    A remainder of order t³ shows up as a slope near 3 (or higher).
    Residuals below ``RESIDUAL_FLOOR`` at all but one point are reported as
    ``exact`` rather than fitted.
    """
    t_grid = np.asarray(sorted(t_grid, reverse=True), dtype=float)
    if t_grid.size < 4 or np.any(t_grid <= 0) or np.any(t_grid > 0.1):
        raise PreconditionError("t_grid needs at least 4 points in (0, 0.1]")
    coeff = renyi_second_order_coeff(fam, p)
    s0 = renyi_entropy(fam.rho, p)
    res = [renyi_entropy(fam.at(t), p) - s0 - t * t * coeff for t in t_grid]
    return fit_loglog_slope(t_grid, res)


def expansion_remainder(a, b, f: ScalarFunction, t: float) -> float:
    """Spectral norm of f(A + tB) - f(A) - t L_A(B) - t² Q_A(B), with f(A + tB) by eigendecomposition."""
    p = _diag_of(a)
    b = _check_pair(p, b)
    exact = hermitian_function(np.diag(p) + t * b, f)
    approx = np.diag(f(p)) + t * apply_L(p, b, f) + t * t * apply_Q(p, b, f)
    return float(np.linalg.norm(exact - approx, 2))
