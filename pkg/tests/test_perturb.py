import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian
from renyistab.channel import DepolarizingParams
from renyistab.core import PreconditionError, PureState, hermitian_function
from renyistab.entropy import renyi_entropy
from renyistab.perturb import (
    DEFAULT_T_GRID,
    PerturbationFamily,
    apply_L,
    apply_Q,
    divided_diff,
    finite_difference_coeff,
    fit_loglog_slope,
    identity_function,
    expansion_remainder,
    power_function,
    random_family,
    renyi_second_order_coeff,
    second_divided_diff,
    stability_family,
    taylor_residual_check,
    trace_L,
    trace_Q,
    xlogx,
)
from renyistab.stability import f_p

SWAP = np.array([[0, 1], [1, 0]], dtype=complex)


def test_divided_diff_examples():
    sq, cube = power_function(2), power_function(3)
    assert divided_diff(sq, 3, 3) == pytest.approx(6)
    assert divided_diff(sq, 1, 2) == pytest.approx(3)
    assert second_divided_diff(cube, 1, 2, 3) == pytest.approx(6)
    # nested quotients as an independent oracle
    f = power_function(2.5)
    x, y, z = 0.3, 0.5, 0.9
    nested = ((f(x) - f(y)) / (x - y) - (f(y) - f(z)) / (y - z)) / (x - z)
    assert second_divided_diff(f, x, y, z) == pytest.approx(nested, rel=1e-12)


@given(st.floats(0.05, 2), st.floats(-1e-5, 1e-5), st.sampled_from([0.5, 1.0, 2.0, 2.5, 3.7]))
def test_divided_diff_confluent_continuity(x, h, q):
    f = power_function(q) if q != 1.0 else xlogx()
    y = x * (1 + h)
    exact = divided_diff(f, x, y)
    if x != y:
        # mpmath-free oracle: the mean value of f' over [x, y] by Gauss-Legendre
        nodes, weights = np.polynomial.legendre.leggauss(8)
        mid, half = (x + y) / 2, (y - x) / 2
        oracle = float(np.sum(weights * f.nth(mid + half * nodes, 1)) / 2)
    else:
        oracle = float(f.nth(x, 1))
    assert exact == pytest.approx(oracle, rel=1e-12)


@given(
    st.lists(st.floats(0.05, 2), min_size=3, max_size=3),
    st.sampled_from([0.5, 2.0, 2.5, 3.7]),
    st.sampled_from([0.0, 1e-12, 1e-9, 1e-6, 1e-3]),
)
def test_second_divided_diff_symmetric(xs, q, squeeze):
    f = power_function(q)
    if squeeze:
        xs[1] = xs[0] * (1 + squeeze)
    vals = [second_divided_diff(f, *(xs[i] for i in perm)) for perm in itertools.permutations(range(3))]
    assert max(vals) - min(vals) <= 1e-12 * max(1.0, abs(vals[0]))


def test_second_divided_diff_confluent():
    f = power_function(3.5)
    x = 0.4
    assert second_divided_diff(f, x, x, x) == pytest.approx(f.nth(x, 2) / 2, rel=1e-14)
    y = 0.7
    # Delta^2 f(x, x, y) = (f'(x) - Delta f(x, y)) / (x - y)
    expect = (f.nth(x, 1) - (f(x) - f(y)) / (x - y)) / (x - y)
    assert second_divided_diff(f, x, x, y) == pytest.approx(expect, rel=1e-10)


def test_L_Q_examples(rng):
    a = np.array([0.3, 0.5, 0.2])
    f = power_function(2.5)
    zero = np.zeros((3, 3))
    assert np.allclose(apply_L(a, zero, f), 0) and np.allclose(apply_Q(a, zero, f), 0)
    b = random_hermitian(rng, 3)
    ident = identity_function()
    assert np.allclose(apply_L(a, b, ident), b)
    assert np.allclose(apply_Q(a, b, ident), 0)
    sq = power_function(2)
    assert np.allclose(apply_L(np.array([1.0, 2.0]), SWAP, sq), 3 * SWAP)
    assert np.allclose(apply_Q(np.array([1.0, 2.0]), SWAP, sq), np.eye(2))


def test_trace_examples(rng):
    a = rng.uniform(0.1, 1, 5)
    hollow = random_hermitian(rng, 5)
    np.fill_diagonal(hollow, 0)
    assert trace_L(a, hollow, power_function(2.3)) == pytest.approx(0, abs=1e-15)
    assert trace_Q(np.array([0.75, 0.25]), SWAP, power_function(2)) == pytest.approx(2)


@given(st.integers(1, 12), st.sampled_from([0.5, 2.0, 3.0, 1.0]), st.integers(0, 2**32 - 1))
def test_trace_formulas_match_operators(side, q, seed):
    rng = np.random.default_rng(seed)
    f = xlogx() if q == 1.0 else power_function(q)
    a = rng.uniform(0.05, 1, side)
    if side > 2:
        a[1] = a[0]
    b = random_hermitian(rng, side)
    assert abs(trace_L(a, b, f) - np.trace(apply_L(a, b, f)).real) <= 1e-12 * max(1, np.abs(b).sum())
    assert abs(trace_Q(a, b, f) - np.trace(apply_Q(a, b, f)).real) <= 1e-12 * max(1, np.abs(b).sum() ** 2)


@pytest.mark.parametrize("f", [power_function(0.5), power_function(2), power_function(3.5), xlogx()], ids=lambda f: f.name)
def test_operator_remainder_is_cubic(rng, f):
    for side in (3, 6, 9):
        a = rng.uniform(0.1, 1, side)
        b = random_hermitian(rng, side) * 0.05 / side
        res = [expansion_remainder(a, b, f, t) for t in DEFAULT_T_GRID]
        fit = fit_loglog_slope(DEFAULT_T_GRID, res)
        assert fit.exact or fit.slope >= 2.7
        # the oracle itself: eigendecomposition reproduces the power
        m = np.diag(a) + 0.01 * b
        if f.name == "x^2":
            assert np.allclose(hermitian_function(m, f), m @ m)


def test_degenerate_continuity(rng):
    a = np.array([0.3, 0.3, 0.4])
    b = random_hermitian(rng, 3)
    for f in (power_function(2.5), xlogx()):
        for op in (apply_L, apply_Q):
            base = op(a, b, f)
            moved = op(a + np.array([0, 1e-9, 0]), b, f)
            assert np.max(np.abs(moved - base)) <= 1e-6 * np.max(np.abs(base))


def test_family_validation():
    rho = np.array([0.5, 0.5])
    with pytest.raises(PreconditionError):
        PerturbationFamily(np.array([1.0, 0.0]), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(PreconditionError):
        PerturbationFamily(rho, np.eye(2), np.zeros((2, 2)))
    with pytest.raises(PreconditionError):
        PerturbationFamily(rho, SWAP, np.eye(2))
    with pytest.raises(PreconditionError):
        PerturbationFamily(rho, np.array([[0, 1], [0, 0]]), np.zeros((2, 2)))


def test_coefficient_examples():
    fam = PerturbationFamily(np.array([0.2, 0.3, 0.5]), np.zeros((3, 3)), np.zeros((3, 3)))
    for p in (1, 2):
        assert renyi_second_order_coeff(fam, p) == 0
        assert taylor_residual_check(fam, p).exact
    prm = DepolarizingParams(0.5, 2, 2)
    fam = stability_family(prm, PureState.basis([1, 1], 2))
    assert renyi_second_order_coeff(fam, 2) == pytest.approx(0.96, abs=1e-12)
    assert renyi_second_order_coeff(fam, 2) == pytest.approx(f_p(2, prm, 2), abs=1e-12)


def test_stability_family_structure():
    prm = DepolarizingParams(0.3, 3, 2)
    vec = np.zeros(9, dtype=complex)
    vec[[4, 5, 8]] = [1, 1j, -1]
    fam = stability_family(prm, PureState(vec / np.sqrt(3), 3, 2))
    assert np.allclose(np.diag(fam.gamma0), 0)
    assert abs(np.trace(fam.gamma1)) < 1e-12
    with pytest.raises(PreconditionError):
        stability_family(DepolarizingParams(1.0, 2, 2), PureState.basis([1, 1], 2))
    with pytest.raises(PreconditionError):
        stability_family(prm, PureState.basis([0, 0], 3))


@pytest.mark.parametrize("seed", range(24))
def test_random_family_expansion(seed):
    fam = random_family(2 + seed % 15, seed)
    for p in (0.5, 1, 2, 3, 5):
        fit = taylor_residual_check(fam, p)
        assert fit.exact or fit.slope >= 2.7
        c = renyi_second_order_coeff(fam, p)
        assert abs(c - finite_difference_coeff(fam, p)) <= 1e-3 * abs(c)


def test_linear_only_family():
    rho = np.array([0.4, 0.35, 0.25])
    g0 = np.array([[0, 1, 2j], [1, 0, 0.5], [-2j, 0.5, 0]]) * 0.01
    fam = PerturbationFamily(rho, g0, np.zeros((3, 3)))
    for p in (1, 2, 3):
        fit = taylor_residual_check(fam, p)
        assert fit.slope >= 2.7


def test_coefficient_matches_direct_expansion():
    # independent check at p = 2: S_2 = -ln Tr rho(t)^2, expand Tr rho(t)^2 by hand
    fam = random_family(5, 99)
    rho = np.diag(fam.rho)
    tr0 = np.trace(rho @ rho).real
    t2 = (np.trace(fam.gamma0 @ fam.gamma0) + 2 * np.trace(rho @ fam.gamma1)).real
    assert renyi_second_order_coeff(fam, 2) == pytest.approx(-t2 / tr0, rel=1e-12)
    s = renyi_entropy(fam.at(1e-3), 2) - renyi_entropy(fam.rho, 2)
    assert s / 1e-6 == pytest.approx(-t2 / tr0, rel=1e-2)


def test_residual_check_preconditions():
    fam = random_family(3, 0)
    with pytest.raises(PreconditionError):
        taylor_residual_check(fam, 2, (0.1, 0.01, 0.001))
    with pytest.raises(PreconditionError):
        taylor_residual_check(fam, 2, (0.5, 0.1, 0.01, 0.001))
