import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density, random_hermitian
from renyistab.core import (
    DensityMatrix,
    PreconditionError,
    PureState,
    eig_hermitian,
    fidelity_pure,
    hamming_weights,
    matrix_power,
    max_product_fidelity,
    partial_trace,
    perturbed_product,
    sample_state,
    tensor,
    trace_distance,
    weight_decomposition,
)

SQ2 = 1 / math.sqrt(2)


def test_eig_examples():
    sp = eig_hermitian(np.eye(2))
    assert np.allclose(sp.eigenvalues, [1, 1])
    sp = eig_hermitian(np.diag([0.75, 0.25]))
    assert np.allclose(sp.eigenvalues, [0.25, 0.75])
    assert np.allclose(np.abs(sp.eigenvectors), [[0, 1], [1, 0]])


@pytest.mark.parametrize("side", [1, 8, 27, 81])
def test_eig_reconstruction_and_orthonormality(rng, side):
    m = random_hermitian(rng, side)
    sp = eig_hermitian(m)
    assert np.all(np.diff(sp.eigenvalues) >= 0)
    assert np.max(np.abs(sp.reconstruct() - m)) <= 1e-10 * np.linalg.norm(m, 2)
    u = sp.eigenvectors
    assert np.max(np.abs(u.conj().T @ u - np.eye(side))) <= 1e-10


def test_eig_rejects_non_hermitian():
    with pytest.raises(PreconditionError, match="symmetry"):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_density_matrix_validation():
    with pytest.raises(PreconditionError):
        DensityMatrix(np.diag([0.5, 0.6]), 2, 1)
    with pytest.raises(PreconditionError):
        DensityMatrix(np.diag([1.5, -0.5]), 2, 1)
    with pytest.raises(PreconditionError):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]), 2, 1)
    with pytest.raises(PreconditionError):
        PureState(np.array([1.0, 1.0]), 2, 1)


def test_matrix_power_examples():
    half = DensityMatrix(np.eye(2) / 2, 2, 1)
    assert np.allclose(matrix_power(half, 2), np.eye(2) / 4)
    proj = sample_state("haar", 2, 2, 0).projector()
    assert np.allclose(matrix_power(proj, 3.7), proj.matrix, atol=1e-12)
    assert np.allclose(matrix_power(DensityMatrix(np.diag([0.75, 0.25]), 2, 1), 3), np.diag([0.421875, 0.015625]))


def test_trace_distance_examples():
    a = PureState.basis([0], 2).projector()
    b = PureState.basis([1], 2).projector()
    assert trace_distance(a, a) == pytest.approx(0, abs=1e-14)
    assert trace_distance(a, b) == pytest.approx(2)
    psi = PureState(np.array([math.sqrt(0.7), math.sqrt(0.3)]), 2, 1)
    assert trace_distance(a, psi.projector()) == pytest.approx(2 * math.sqrt(0.3), abs=1e-12)


@given(st.integers(2, 3), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_trace_distance_fidelity_identity(d, n, seed):
    rng = np.random.default_rng(seed)
    psi, phi = sample_state("haar", d, n, rng), sample_state("haar", d, n, rng)
    td = trace_distance(psi.projector(), phi.projector())
    assert abs(td**2 - 4 * (1 - fidelity_pure(psi, phi))) <= 1e-10


def test_fidelity_examples():
    psi = PureState(np.array([math.sqrt(0.9), 0, 0, math.sqrt(0.1)]), 2, 2)
    zero = PureState.basis([0, 0], 2)
    assert fidelity_pure(psi, psi) == pytest.approx(1)
    assert fidelity_pure(zero, PureState.basis([1, 1], 2)) == 0
    assert fidelity_pure(psi, zero) == pytest.approx(0.9)
    with pytest.raises(PreconditionError):
        fidelity_pure(zero, PureState.basis([0], 2))


def test_tensor_examples():
    z = PureState.basis([0], 2)
    assert np.allclose(tensor([z, z]).amplitudes, [1, 0, 0, 0])
    plus = PureState(np.array([SQ2, SQ2]), 2, 1)
    assert np.allclose(tensor([plus] * 3).amplitudes, np.full(8, 2**-1.5))
    ab = PureState(np.array([0.6, 0.8j]), 2, 1)
    assert np.allclose(tensor([ab, z]).amplitudes, [0.6, 0, 0.8j, 0])


def test_partial_trace_examples(rng):
    r1 = DensityMatrix(random_density(rng, 2), 2, 1)
    r2q = DensityMatrix(random_density(rng, 2), 2, 1)
    joint = DensityMatrix(np.kron(r1.matrix, r2q.matrix), 2, 2)
    assert np.allclose(partial_trace(joint, 1).matrix, r1.matrix)
    assert np.allclose(partial_trace(joint, 0).matrix, r2q.matrix)
    bell = PureState(np.array([SQ2, 0, 0, SQ2]), 2, 2).projector()
    for site in (0, 1):
        assert np.allclose(partial_trace(bell, site).matrix, np.eye(2) / 2)
    qutrits = DensityMatrix(random_density(rng, 9), 3, 2)
    red = partial_trace(qutrits, 0)
    assert abs(np.trace(red.matrix) - 1) <= 1e-12
    assert np.linalg.eigvalsh(red.matrix).min() >= -1e-12
    with pytest.raises(PreconditionError):
        partial_trace(joint, 2)


def test_sample_state_examples():
    prod = sample_state("product", 2, 3, 7)
    value, _ = max_product_fidelity(prod, restarts=2)
    assert value == pytest.approx(1, abs=1e-12)
    assert np.array_equal(sample_state("haar", 3, 2, 5).amplitudes, sample_state("haar", 3, 2, 5).amplitudes)
    rng = np.random.default_rng(0)
    vals = np.array([abs(sample_state("haar", 2, 1, rng).amplitudes[0]) ** 2 for _ in range(10_000)])
    # |<0|psi>|^2 is uniform on [0, 1] for Haar qubits: mean 1/2, sd 1/sqrt(12)
    assert abs(vals.mean() - 0.5) <= 3 / math.sqrt(12 * 10_000)
    with pytest.raises(PreconditionError):
        sample_state("ghz", 2, 2, 0)


def test_perturbed_product_examples():
    phi = PureState.basis([1, 1], 2)
    zero = PureState.basis([0, 0], 2)
    assert np.allclose(perturbed_product(0.0, phi).amplitudes, zero.amplitudes)
    assert np.allclose(perturbed_product(1.0, phi).amplitudes, phi.amplitudes)
    assert fidelity_pure(perturbed_product(0.01, phi), zero) == pytest.approx(0.99, abs=1e-15)
    with pytest.raises(PreconditionError):
        perturbed_product(0.1, PureState(np.array([SQ2, 0, 0, SQ2]), 2, 2))
    with pytest.raises(PreconditionError):
        perturbed_product(-0.1, phi)


def test_weight_decomposition_examples():
    assert weight_decomposition(PureState.basis([1, 1], 2)) == pytest.approx({2: 1.0})
    mix = PureState(np.array([0, 0, SQ2, SQ2]), 2, 2)
    assert weight_decomposition(mix) == pytest.approx({1: 0.5, 2: 0.5})
    assert weight_decomposition(PureState.basis([2, 2], 3)) == pytest.approx({2: 1.0})
    assert list(hamming_weights(3, 2)) == [0, 1, 1, 1, 2, 2, 1, 2, 2]


@given(st.integers(2, 3), st.integers(1, 3), st.floats(0, 0.999), st.integers(0, 2**32 - 1))
def test_weights_sum_and_anchor_fidelity(d, n, eps0, seed):
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(d**n) + 1j * rng.standard_normal(d**n)
    vec[0] = 0
    phi = PureState(vec / np.linalg.norm(vec), d, n)
    assert abs(sum(weight_decomposition(phi).values()) - 1) <= 1e-12
    assert 0 not in weight_decomposition(phi)
    psi = perturbed_product(eps0, phi)
    assert abs(fidelity_pure(psi, PureState.basis([0] * n, d)) - (1 - eps0)) <= 1e-12


def test_max_product_fidelity_examples():
    value, arg = max_product_fidelity(PureState.basis([0, 0, 0], 2))
    assert value == pytest.approx(1)
    assert fidelity_pure(arg, PureState.basis([0, 0, 0], 2)) == pytest.approx(1)
    bell = PureState(np.array([SQ2, 0, 0, SQ2]), 2, 2)
    assert max_product_fidelity(bell)[0] == pytest.approx(0.5, abs=1e-12)
    skew = PureState(np.array([math.sqrt(0.99), 0, 0, math.sqrt(0.01)]), 2, 2)
    assert max_product_fidelity(skew)[0] >= 0.99 - 1e-15


def test_max_product_fidelity_argmax_is_certified(rng):
    psi = sample_state("haar", 3, 2, rng)
    value, arg = max_product_fidelity(psi, restarts=6, seed=1)
    assert fidelity_pure(psi, arg) == pytest.approx(value, abs=1e-14)
    # for two parties the optimum is the top squared Schmidt coefficient
    top = np.linalg.svd(psi.amplitudes.reshape(3, 3), compute_uv=False)[0] ** 2
    assert value == pytest.approx(top, abs=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_max_product_fidelity_monotone_in_restarts(seed):
    psi = sample_state("haar", 2, 3, seed)
    vals = [max_product_fidelity(psi, restarts=r, seed=seed)[0] for r in (1, 2, 5, 9)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
