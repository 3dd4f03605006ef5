import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from sympy.physics.wigner import wigner_d_small

from su2para import irreps
from su2para.config import metric_scale
from su2para.group import random_matrices


@pytest.mark.parametrize("two_j", range(0, 9))
@pytest.mark.parametrize("beta", [0.3, 1.1, 2.9])
def test_little_d_matches_closed_form(two_j, beta):
    want = np.array(wigner_d_small(sp.Rational(two_j, 2), sp.Float(beta, 30)).evalf(20), dtype=float)
    got = irreps.little_d(two_j, np.array([beta]))[0]
    assert np.abs(got - want).max() < 1e-13


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 8))
def test_homomorphism_and_unitarity(seed, two_j):
    r = np.random.default_rng(seed)
    u, v = random_matrices(2, r)
    Du, Dv, Duv = (irreps.wigner_matrices(two_j, x[None])[0] for x in (u, v, u @ v))
    assert np.abs(Duv - Du @ Dv).max() < 1e-12
    assert np.abs(Du @ Du.conj().T - np.eye(two_j + 1)).max() < 1e-12


def test_spin_half_is_defining_representation(rng):
    u = random_matrices(10, rng)
    assert np.abs(irreps.wigner_matrices(1, u) - u).max() < 1e-13


@pytest.mark.parametrize("two_j", range(0, 13))
def test_casimir_is_scalar(two_j):
    C = irreps.casimir(two_j)
    lam = irreps.laplace_eigenvalue2(two_j)
    assert np.abs(C + lam * np.eye(two_j + 1)).max() < 1e-12
    j = two_j / 2
    assert lam == j * (j + 1) / 2


def test_casimir_follows_metric_scale():
    with metric_scale(3.0):
        assert irreps.laplace_eigenvalue2(4) == 2 * 3 / 6
        assert np.abs(irreps.casimir(4) + 1.0 * np.eye(5)).max() < 1e-12


def test_lie_basis_is_orthonormal():
    assert np.abs(irreps.killing_gram() - np.eye(3)).max() < 1e-13


@pytest.mark.parametrize("two_j", [1, 2, 5])
def test_derived_representation_preserves_brackets(two_j, rng):
    X, Y = (rng.standard_normal(3) for _ in range(2))
    basis = irreps.lie_basis()
    A = sum(c * B for c, B in zip(X, basis))
    Bm = sum(c * B for c, B in zip(Y, basis))
    lhs = irreps.drep2(two_j, A @ Bm - Bm @ A)
    dA, dB = irreps.drep2(two_j, A), irreps.drep2(two_j, Bm)
    assert np.abs(lhs - (dA @ dB - dB @ dA)).max() < 1e-12


def test_entry_derivative_matches_finite_difference(rng):
    from su2para.group import GroupPoint, exp_algebra, multiply
    g = GroupPoint(random_matrices(1, rng)[0])
    X = irreps.lie_basis()[1]
    h = 1e-6
    fd = (irreps.wigner_D(1, multiply(g, exp_algebra(h * X)))
          - irreps.wigner_D(1, multiply(g, exp_algebra(-h * X)))) / (2 * h)
    assert np.abs(irreps.entry_derivative(1, X, g) - fd).max() < 1e-8


def test_sizes():
    assert irreps.size(0) == 0
    assert irreps.bracket(0) == 1
    assert np.isclose(irreps.size(2), 1.0)
