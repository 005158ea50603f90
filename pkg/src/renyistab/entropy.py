"""Quantum Rényi / von Neumann entropies and minimal output entropies of the depolarizing channel.

All logarithms are natural; entropies are in nats.
"""

from __future__ import annotations

import numpy as np

from .channel import DepolarizingParams, depolarize_operator, expand_spectrum
from .core import (
    DensityMatrix,
    PreconditionError,
    PureState,
    SeedLike,
    _haar_vector,
    as_generator,
    clip_spectrum,
    eig_hermitian,
)

# eigenvalues below this are treated as exact zeros in entropy sums
ZERO_EIGENVALUE = 1e-14


def _check_order(p: float) -> float:
    p = float(p)
    if not p > 0:
        raise PreconditionError(f"Rényi order must be positive, got p={p}")
    return p


def _as_spectrum(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.spectrum()
    if isinstance(state, list) and state and isinstance(state[0], tuple):
        return expand_spectrum(state)
    arr = np.asarray(state)
    if arr.ndim == 2:
        return clip_spectrum(eig_hermitian(arr).eigenvalues)
    return clip_spectrum(arr.astype(float))


def renyi_from_spectrum(w: np.ndarray, p: float) -> float:
    w = w[w > ZERO_EIGENVALUE]
    if p == 1.0:
        return float(-np.sum(w * np.log(w)))
    return float(np.log(np.sum(w**p)) / (1.0 - p))


def renyi_entropy(state, p: float) -> float:
    """S_p(rho) = ln(Tr rho^p) / (1 - p); von Neumann entropy at p = 1.

    Parameters
    ----------
    state : DensityMatrix, Hermitian ndarray, eigenvalue array, or list of
        ``(value, multiplicity)`` pairs as returned by
        :func:`renyistab.channel.product_output_spectrum`.
    p : float
        Rényi order, p > 0.
    """
    return renyi_from_spectrum(_as_spectrum(state), _check_order(p))


def min_output_renyi_closed(params: DepolarizingParams, p: float) -> float:
    """Minimal output entropy of the n-fold channel, attained on any product input."""
    p = _check_order(p)
    a, b, d, n = params.a, params.b, params.d, params.n
    if p == 1.0:
        per_site = -sum(x * np.log(x) * m for x, m in ((a, 1), (b, d - 1)) if x > 0)
    else:
        per_site = np.log(a**p + (d - 1) * b**p) / (1.0 - p)
    return float(n * per_site)


def _ascent_direction(params: DepolarizingParams, out: np.ndarray, p: float) -> np.ndarray:
    # gradient (up to a positive factor) of the convex functional
    # P -> sign(p - 1) Tr D(P)^p  (p != 1)  or  Tr D(P) ln D(P)  (p = 1);
    # the channel is self-adjoint, so D^dagger = D
    w, u = eig_hermitian(out)
    w = np.maximum(w, ZERO_EIGENVALUE)
    g = np.log(w) if p == 1.0 else np.sign(p - 1.0) * w ** (p - 1.0)
    return depolarize_operator(params, (u * g) @ u.conj().T)


def min_output_renyi_numeric(
    params: DepolarizingParams,
    p: float,
    restarts: int = 8,
    seed: SeedLike = 0,
    max_iter: int = 5000,
    tol: float = 1e-15,
) -> tuple[float, PureState]:
    """Search all pure inputs for the smallest output entropy.

    Every step replaces the input by the dominant eigenvector of the
    linearized objective, which is the exact maximizer of the linearization
    over pure states; the objective is convex in the input projector, so each
    step never increases the entropy. Restarts begin at Haar-random
    (generically entangled) states drawn sequentially from ``seed``.

    Returns the best value together with the input achieving it. The value
    is an upper bound on the true minimum.
    """
    p = _check_order(p)
    if restarts < 1:
        raise PreconditionError("restarts must be >= 1")
    d, n = params.d, params.n
    dim = d**n
    rng = as_generator(seed)
    if params.lam == 1.0:
        # identity channel: every pure input is optimal
        return 0.0, PureState(_haar_vector(rng, dim), d, n)

    best_val, best_vec = np.inf, None
    for _ in range(restarts):
        vec = _haar_vector(rng, dim)
        out = depolarize_operator(params, np.outer(vec, vec.conj()))
        val = renyi_entropy(out, p)
        for _ in range(max_iter):
            g = _ascent_direction(params, out, p)
            _, u = eig_hermitian(g)
            cand = u[:, -1]
            cand_out = depolarize_operator(params, np.outer(cand, cand.conj()))
            cand_val = renyi_entropy(cand_out, p)
            if cand_val > val:
                break
            improved = val - cand_val
            vec, out, val = cand, cand_out, cand_val
            if improved <= tol:
                break
        if val < best_val:
            best_val, best_vec = val, vec
    return float(best_val), PureState(best_vec / np.linalg.norm(best_vec), d, n)
