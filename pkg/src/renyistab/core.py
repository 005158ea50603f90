"""Hermitian linear algebra and pure/mixed states on qudit registers.

States are stored densely: a register of ``n`` qudits of local dimension
``d`` is a vector (or matrix) of side ``d**n`` in the computational basis,
site 0 being the most significant digit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

# Shared numerical tolerances.
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12
ORTHO_TOL = 1e-12

SeedLike = Union[int, Sequence[int], np.random.Generator, None]


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _check_register(d: int, n: int, min_n: int = 1) -> None:
    if int(d) != d or d < 2:
        raise PreconditionError(f"local dimension must be an integer >= 2, got d={d}")
    if int(n) != n or n < min_n:
        raise PreconditionError(f"site count must be an integer >= {min_n}, got n={n}")


def _hermitian_defect(m: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(m))))
    return float(np.max(np.abs(m - m.conj().T))) / scale


class HermitianSpectrum(NamedTuple):
    """Ascending eigenvalues with the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


@dataclass(frozen=True)
class PureState:
    """Unit vector in (C^d)^{⊗n}."""

    amplitudes: np.ndarray
    d: int
    n: int

    def __post_init__(self):
        _check_register(self.d, self.n)
        amps = _freeze(np.ravel(self.amplitudes))
        if amps.size != self.d**self.n:
            raise PreconditionError(
                f"expected {self.d ** self.n} amplitudes for d={self.d}, n={self.n}, got {amps.size}"
            )
        if not np.all(np.isfinite(amps)):
            raise PreconditionError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise PreconditionError(f"state not normalized: |psi|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, d: int, n: int | None = None) -> "PureState":
        """Normalize ``vec`` and wrap it; ``n`` is inferred from the length if omitted."""
        vec = np.asarray(vec, dtype=complex).ravel()
        if n is None:
            n = int(round(np.log(vec.size) / np.log(d)))
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise PreconditionError("cannot normalize the zero vector")
        return cls(vec / norm, d, n)

    @classmethod
    def basis(cls, digits: Sequence[int], d: int) -> "PureState":
        """Computational basis state |x_0 x_1 ... x_{n-1}>."""
        n = len(digits)
        vec = np.zeros(d**n, dtype=complex)
        vec[int(np.ravel_multi_index(tuple(digits), (d,) * n))] = 1.0
        return cls(vec, d, n)

    @property
    def dim(self) -> int:
        return self.d**self.n

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.d, self.n)


@dataclass(frozen=True)
class DensityMatrix:
    """Positive semidefinite, unit-trace operator on (C^d)^{⊗n}.

    ``n = 0`` is allowed and denotes the trivial 1x1 state left after tracing
    out every site.
    """

    matrix: np.ndarray
    d: int
    n: int

    def __post_init__(self):
        _check_register(self.d, self.n, min_n=0)
        m = _freeze(self.matrix)
        side = self.d**self.n
        if m.shape != (side, side):
            raise PreconditionError(f"expected a {side}x{side} matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise PreconditionError("matrix entries must be finite")
        defect = _hermitian_defect(m)
        if defect > HERMITIAN_TOL:
            raise PreconditionError(f"density matrix not Hermitian (defect {defect:.3e})")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise PreconditionError(f"density matrix trace {tr.real:.15g} != 1")
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if lo < -PSD_TOL:
            raise PreconditionError(f"density matrix not PSD (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.d**self.n

    def spectrum(self) -> np.ndarray:
        """Ascending eigenvalues, with PSD drift clipped to zero."""
        return clip_spectrum(eig_hermitian(self.matrix).eigenvalues)


def eig_hermitian(m) -> HermitianSpectrum:
    """Eigendecomposition of a Hermitian matrix.

    Raises
    ------
    PreconditionError
        If ``m`` is not square or deviates from Hermiticity by more than
        ``HERMITIAN_TOL`` relative to its largest entry.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {m.shape}")
    defect = _hermitian_defect(m)
    if defect > HERMITIAN_TOL:
        raise PreconditionError(f"matrix is not Hermitian: symmetry violation {defect:.3e}")
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    return HermitianSpectrum(w, u)


def clip_spectrum(w: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues in [-PSD_TOL, 0); anything more negative is an error."""
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -PSD_TOL:
        raise PreconditionError(f"eigenvalue {w.min():.3e} below -{PSD_TOL:g}; operator is not PSD")
    return np.where(w < 0, 0.0, w)


def hermitian_function(m, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis."""
    w, u = eig_hermitian(m)
    return (u * f(w)) @ u.conj().T


def matrix_power(rho: DensityMatrix, p: float) -> np.ndarray:
    if not p > 0:
        raise PreconditionError(f"power must be positive, got p={p}")
    w, u = eig_hermitian(rho.matrix)
    w = clip_spectrum(w)
    return (u * w**p) @ u.conj().T


def _same_register(a, b) -> None:
    if (a.d, a.n) != (b.d, b.n):
        raise PreconditionError(f"dimension mismatch: (d={a.d}, n={a.n}) vs (d={b.d}, n={b.n})")


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Trace norm ||A - B||_1 (no factor 1/2), so orthogonal pure states give 2."""
    _same_register(a, b)
    w = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(np.sum(np.abs(w)))


def fidelity_pure(psi: PureState, phi: PureState) -> float:
    _same_register(psi, phi)
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)


def tensor(states: Sequence[PureState]) -> PureState:
    if not states:
        raise PreconditionError("need at least one factor")
    d = states[0].d
    if any(s.d != d for s in states):
        raise PreconditionError(f"mixed local dimensions: {[s.d for s in states]}")
    vec = np.array([1.0 + 0j])
    for s in states:
        vec = np.kron(vec, s.amplitudes)
    return PureState(vec, d, sum(s.n for s in states))


def partial_trace(rho: DensityMatrix, site: int) -> DensityMatrix:
    """Trace out a single site, returning the state of the remaining n-1 sites."""
    d, n = rho.d, rho.n
    if not 0 <= site < n:
        raise PreconditionError(f"site {site} out of range for n={n}")
    t = rho.matrix.reshape((d,) * (2 * n))
    reduced = np.trace(t, axis1=site, axis2=n + site)
    side = d ** (n - 1)
    return DensityMatrix(reduced.reshape(side, side), d, n - 1)


def _haar_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def sample_state(kind: str, d: int, n: int, seed: SeedLike = None) -> PureState:
    """Draw a random pure state.

    Parameters
    ----------
    kind : {"haar", "product"}
        ``"haar"`` samples the uniform (unitarily invariant) measure on the
        whole register; ``"product"`` is a tensor product of ``n``
        independent Haar-random single-qudit states.
    d, n : int
        Local dimension and number of sites.
    seed : int, sequence of int, Generator or None
        Fixed seeds give identical amplitudes.
    """
    _check_register(d, n)
    rng = as_generator(seed)
    if kind == "haar":
        return PureState(_haar_vector(rng, d**n), d, n)
    if kind == "product":
        return tensor([PureState(_haar_vector(rng, d), d, 1) for _ in range(n)])
    raise PreconditionError(f"unknown state kind {kind!r}; expected 'haar' or 'product'")


def perturbed_product(eps0: float, phi_perp: PureState) -> PureState:
    """sqrt(1 - eps0)|0...0> + sqrt(eps0)|phi_perp>."""
    if not 0.0 <= eps0 <= 1.0:
        raise PreconditionError(f"eps0 must lie in [0, 1], got {eps0}")
    overlap = abs(phi_perp.amplitudes[0])
    if overlap > ORTHO_TOL:
        raise PreconditionError(f"phi_perp not orthogonal to |0...0> (overlap {overlap:.3e})")
    vec = np.sqrt(eps0) * phi_perp.amplitudes
    vec = vec.copy()
    vec[0] = np.sqrt(1.0 - eps0)
    return PureState(vec / np.linalg.norm(vec), phi_perp.d, phi_perp.n)


def hamming_weights(d: int, n: int) -> np.ndarray:
    """Number of nonzero d-ary digits of every basis label 0..d^n - 1."""
    digits = np.array(list(itertools.product(range(d), repeat=n)), dtype=int).reshape(-1, n)
    return np.count_nonzero(digits, axis=1)


def weight_decomposition(phi: PureState) -> dict[int, float]:
    """Squared amplitude carried by each Hamming weight k (zero weights omitted)."""
    probs = np.abs(phi.amplitudes) ** 2
    weights = np.bincount(hamming_weights(phi.d, phi.n), weights=probs, minlength=phi.n + 1)
    return {k: float(w) for k, w in enumerate(weights) if w > 0}


def _site_contraction(tensor_psi: np.ndarray, vecs: list[np.ndarray], site: int) -> np.ndarray:
    # <phi_others| psi> as a vector on `site`
    t = tensor_psi
    for s in reversed(range(len(vecs))):
        if s == site:
            continue
        t = np.tensordot(t, vecs[s].conj(), axes=([s], [0]))
    return t


def max_product_fidelity(
    psi: PureState, restarts: int = 32, seed: SeedLike = 0, sweeps: int = 200, tol: float = 1e-14
) -> tuple[float, PureState]:
    """Best overlap |<psi|phi_1,...,phi_n>|^2 found by alternating local updates.

    Each sweep visits every site and replaces its vector by the normalized
    contraction of ``psi`` with the other sites' vectors, which is the exact
    maximizer with the rest held fixed. Restart 0 starts from the basis
    string of largest amplitude, the others from random product states drawn
    sequentially from ``seed``, so more restarts never give a smaller value.

    The result is a lower bound on the true maximum.
    """
    if restarts < 1:
        raise PreconditionError("restarts must be >= 1")
    d, n = psi.d, psi.n
    t = psi.amplitudes.reshape((d,) * n)
    rng = as_generator(seed)
    best_val, best = -1.0, None
    for r in range(restarts):
        if r == 0:
            idx = np.unravel_index(int(np.argmax(np.abs(psi.amplitudes))), (d,) * n)
            vecs = [np.eye(d, dtype=complex)[i] for i in idx]
        else:
            vecs = [_haar_vector(rng, d) for _ in range(n)]
        val = 0.0
        for _ in range(sweeps):
            for s in range(n):
                v = _site_contraction(t, vecs, s)
                norm = float(np.linalg.norm(v))
                if norm > 0:
                    vecs[s] = v / norm
            # after the last local update the overlap is exactly norm**2
            new = norm**2
            if new - val <= tol:
                val = max(val, new)
                break
            val = new
        # certify on the assembled product state rather than the sweep bookkeeping
        candidate = tensor([PureState(v, d, 1) for v in vecs])
        certified = fidelity_pure(psi, candidate)
        if certified > best_val:
            best_val, best = certified, candidate
    return best_val, best
