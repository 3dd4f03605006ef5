import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, strategies as st

from su2para import group
from su2para.group import (GroupPoint, QuadratureError, distance, euler_matrices, from_euler, haar_grid,
                           identity, inverse, matrix_euler, multiply, random_matrices, to_euler)

angles = st.tuples(st.floats(0, 2 * np.pi), st.floats(0.01, np.pi - 0.01), st.floats(0, 4 * np.pi))


def test_two_rejects_non_half_integers():
    assert group.two(Fraction(3, 2)) == 3
    assert group.two(2) == 4
    with pytest.raises(ValueError):
        group.two(Fraction(1, 3))


def test_random_matrices_are_su2(rng):
    u = random_matrices(50, rng)
    eye = np.einsum("nij,nkj->nik", u, u.conj())
    assert np.abs(eye - np.eye(2)).max() < 1e-14
    assert np.abs(np.linalg.det(u) - 1).max() < 1e-14


@given(angles)
def test_euler_round_trip(abg):
    u = euler_matrices(*[np.array([a]) for a in abg])
    back = euler_matrices(*matrix_euler(u))
    assert np.abs(back - u).max() < 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_group_axioms(seed):
    r = np.random.default_rng(seed)
    g, h, k = (GroupPoint(u) for u in random_matrices(3, r))
    lhs = multiply(multiply(g, h), k).u
    rhs = multiply(g, multiply(h, k)).u
    assert np.abs(lhs - rhs).max() < 1e-13
    assert np.abs(multiply(g, inverse(g)).u - identity().u).max() < 1e-13


@given(st.integers(0, 2 ** 32 - 1))
def test_distance_is_left_invariant_and_symmetric(seed):
    r = np.random.default_rng(seed)
    g, h, k = (GroupPoint(u) for u in random_matrices(3, r))
    d = distance(g, h)
    assert abs(d - distance(h, g)) < 1e-12
    assert abs(d - distance(multiply(k, g), multiply(k, h))) < 1e-10


def test_euler_of_identity():
    e = to_euler(identity())
    assert np.abs(from_euler(e).u - np.eye(2)).max() < 1e-14


@pytest.mark.parametrize("B", [Fraction(1, 2), 1, Fraction(5, 2), 4, 8])
def test_grid_is_exact_for_schur_relations(B):
    grid = haar_grid(B)
    assert grid.schur_residual() <= 1e-10
    assert abs(grid.weights.sum() - 1) < 1e-13


def test_too_small_grid_fails_schur():
    small = group.QuadratureGrid(2, n_beta=1)
    assert small.schur_residual() > 1e-3


def test_grid_integrates_polynomials_of_entries(rng):
    # |u_00|^2 has Haar mean 1/2, |u_00|^4 has mean 1/3
    grid = haar_grid(2)
    u = grid.matrices
    assert abs(grid.integrate(np.abs(u[:, 0, 0]) ** 2) - 0.5) < 1e-14
    assert abs(grid.integrate(np.abs(u[:, 0, 0]) ** 4) - 1 / 3) < 1e-14


def test_grid_for_total_is_shared():
    assert group.grid_for_total(8) is group.grid_for_total(8)
    assert group.grid_for_total(7).two_b == 4


def test_quadrature_error_is_runtime_error():
    assert issubclass(QuadratureError, RuntimeError)
