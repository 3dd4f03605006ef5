import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from sympy.physics.wigner import clebsch_gordan

from frozen import WEYL_BRACKET

from su2para import spectral
from su2para.fourier import SpectralFunction
from su2para.group import random_matrices
from su2para.irreps import wigner_matrices



def _cg_cases(max_two=4):
    for tj1, tj2 in itertools.product(range(max_two + 1), repeat=2):
        for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2):
            for tm1 in range(-tj1, tj1 + 1, 2):
                for tm2 in range(-tj2, tj2 + 1, 2):
                    if abs(tm1 + tm2) <= tJ:
                        yield tj1, tm1, tj2, tm2, tJ, tm1 + tm2


@pytest.mark.parametrize("case", list(_cg_cases(3)))
def test_cg_matches_exact_oracle(case):
    tj1, tm1, tj2, tm2, tJ, tM = case
    h = lambda t: sp.Rational(t, 2)
    want = float(clebsch_gordan(h(tj1), h(tj2), h(tJ), h(tm1), h(tm2), h(tM)))
    assert abs(spectral.cg_coefficient(*case) - want) < 1e-14


@pytest.mark.parametrize("tj1,tj2", [(1, 1), (2, 3), (4, 4), (7, 2)])
def test_cg_table_is_orthogonal_and_decomposes(tj1, tj2, rng):
    U = spectral.cg_table2(tj1, tj2).stacked()
    assert np.abs(U @ U.T - np.eye(U.shape[0])).max() < 1e-13
    u = random_matrices(1, rng)
    kron = np.kron(wigner_matrices(tj1, u)[0], wigner_matrices(tj2, u)[0])
    blocks = [wigner_matrices(t, u)[0] for t in spectral.cg_table2(tj1, tj2).spins()]
    from scipy.linalg import block_diag
    assert np.abs(U @ kron @ U.T - block_diag(*blocks)).max() < 1e-12


@pytest.mark.parametrize("tj1,tj2,tJ", [(1, 1, 2), (3, 2, 1), (4, 4, 6), (8, 5, 7)])
def test_cg_lowering_recurrence(tj1, tj2, tJ):
    assert spectral.cg_recurrence_residual(tj1, tj2, tJ) < 1e-13


def test_cg_selection_rules():
    assert spectral.cg_coefficient(1, 1, 1, 1, 2, 0) == 0.0
    assert spectral.cg_coefficient(2, 0, 2, 0, 2, 0) == 0.0  # parity: j1 + j2 + J odd with m = 0


@given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 2 ** 32 - 1))
def test_products_stay_in_triangle(tj1, tj2, seed):
    r = np.random.default_rng(seed)
    rep = spectral.verify_spec_prd(spectral.random_single_spin(tj1, r), spectral.random_single_spin(tj2, r))
    assert rep.outside_mass <= 1e-10
    assert set(rep.support) <= set(rep.expected)


def test_localize_half_half(rng):
    rep = spectral.verify_spec_prd(spectral.random_single_spin(1, rng), spectral.random_single_spin(1, rng))
    assert [str(s) for s in rep.support] == ["0", "1"]


def test_verify_rejects_multi_spin(rng):
    f = SpectralFunction.from_blocks({1: np.eye(2), 2: np.eye(3)})
    with pytest.raises(ValueError):
        spectral.verify_spec_prd(f, f)


def test_spectral_mass_sums_to_plancherel(rng):
    from su2para.fourier import random_spectral, plancherel_norm
    f = random_spectral(5, rng)
    assert np.isclose(spectral.spectral_mass(f).sum(), plancherel_norm(f) ** 2)


@given(st.floats(0.5, 40))
def test_weyl_count_two_routes(t):
    count, _ = spectral.weyl_count(t)
    assert spectral.weyl_closed_form(t) == count


def test_weyl_ratio_stays_in_frozen_bracket():
    ts = np.linspace(5, 20, 301)
    r = np.array([spectral.weyl_count(t)[1] for t in ts])
    assert r.min() >= WEYL_BRACKET[0] and r.max() <= WEYL_BRACKET[1]
    assert WEYL_BRACKET[1] / WEYL_BRACKET[0] <= 3
