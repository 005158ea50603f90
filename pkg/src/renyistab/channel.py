"""The qudit depolarizing channel D(rho) = lam*rho + (1 - lam)*I/d and its tensor powers."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .core import DensityMatrix, PreconditionError


@dataclass(frozen=True)
class DepolarizingParams:
    """Channel strength ``lam`` on ``n`` qudits of dimension ``d``.

    ``a`` and ``b`` are the output eigenvalues of a single site fed a pure
    state (``a`` once, ``b`` with multiplicity d - 1); ``r = a / b``.
    """

    lam: float
    d: int
    n: int = 1

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise PreconditionError(f"lambda must lie in [0, 1], got {self.lam}")
        if int(self.d) != self.d or self.d < 2:
            raise PreconditionError(f"d must be an integer >= 2, got {self.d}")
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError(f"n must be an integer >= 1, got {self.n}")

    @property
    def a(self) -> float:
        return (1.0 + (self.d - 1) * self.lam) / self.d

    @property
    def b(self) -> float:
        return (1.0 - self.lam) / self.d

    @property
    def r(self) -> float:
        if self.lam >= 1.0:
            raise PreconditionError("r = a/b is undefined at lambda = 1 (b = 0)")
        return self.a / self.b

    def require_interior(self) -> None:
        """Closed forms in ``r`` need 0 < lam < 1."""
        if not 0.0 < self.lam < 1.0:
            raise PreconditionError(f"lambda must lie strictly inside (0, 1), got {self.lam}")


def depolarize_operator(params: DepolarizingParams, m: np.ndarray) -> np.ndarray:
    """Apply the channel sitewise to an arbitrary operator of side d^n.

    Works on non-positive operators as well, which is how the perturbation
    directions are pushed through the channel.
    """
    d, n, lam = params.d, params.n, params.lam
    m = np.asarray(m, dtype=complex)
    side = d**n
    if m.shape != (side, side):
        raise PreconditionError(f"operator shape {m.shape} does not match d={d}, n={n}")
    t = m.reshape((d,) * (2 * n))
    eye = np.eye(d) / d
    for s in range(n):
        reduced = np.trace(t, axis1=s, axis2=n + s)
        # reinsert I/d on site s; axes of `mixed` are (others..., ket_s, bra_s)
        mixed = np.multiply.outer(reduced, eye)
        mixed = np.moveaxis(mixed, (2 * n - 2, 2 * n - 1), (s, n + s))
        t = lam * t + (1.0 - lam) * mixed
    return t.reshape(side, side)


def apply_depolarizing(params: DepolarizingParams, rho: DensityMatrix) -> DensityMatrix:
    if (rho.d, rho.n) != (params.d, params.n):
        raise PreconditionError(
            f"dimension mismatch: state has (d={rho.d}, n={rho.n}), channel (d={params.d}, n={params.n})"
        )
    return DensityMatrix(depolarize_operator(params, rho.matrix), rho.d, rho.n)


def product_output_spectrum(params: DepolarizingParams) -> list[tuple[float, int]]:
    """Eigenvalues a^(n-k) b^k with multiplicity C(n, k) (d-1)^k, for k = 0..n."""
    a, b, d, n = params.a, params.b, params.d, params.n
    return [(a ** (n - k) * b**k, comb(n, k) * (d - 1) ** k) for k in range(n + 1)]


def expand_spectrum(spectrum: list[tuple[float, int]]) -> np.ndarray:
    """Flatten (value, multiplicity) pairs into an ascending eigenvalue array."""
    return np.sort(np.concatenate([np.full(m, v, dtype=float) for v, m in spectrum]))


def weyl_kraus_operators(params: DepolarizingParams) -> list[np.ndarray]:
    """Single-site Kraus operators built from the d^2 Weyl (clock-shift) unitaries.

    Only used as an independent cross-check of ``depolarize_operator`` for n = 1.
    """
    d, lam = params.d, params.lam
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    ops = []
    for j in range(d):
        for k in range(d):
            w = np.linalg.matrix_power(shift, j) @ np.linalg.matrix_power(clock, k)
            weight = (1.0 - lam) / d**2 + (lam if j == k == 0 else 0.0)
            ops.append(np.sqrt(weight) * w)
    return ops
