import numpy as np
import pytest
from hypothesis import given, strategies as st

from frozen import SQUARE_BRACKETS

from su2para import littlewood_paley as lp
from su2para.fourier import SpectralFunction, packed_spins, random_spectral, sobolev_norm
from su2para.group import grid_for_total
from su2para.irreps import size

seeds = st.integers(0, 2 ** 32 - 1)


def test_windows():
    W = lp.WINDOWS
    assert W.phi(0.3) == 1.0 and W.phi(1.2) == 0.0
    lam = np.linspace(0.55, 0.95, 9)
    h = 1e-6
    fd = -lam * (W.phi(lam + h) - W.phi(lam - h)) / (2 * h)
    assert np.abs(W.psi(lam) - fd).max() < 1e-7


def test_partition_of_unity():
    assert lp.WINDOWS.partition_residual(np.geomspace(1, 256, 200)) < 1e-10


def test_make_windows_rejects_bad_order():
    with pytest.raises(lp.WindowError):
        lp.make_windows(1.0, 0.5)


@given(seeds, st.integers(1, 16))
def test_dyadic_reconstruction(seed, tb):
    f = random_spectral(tb, np.random.default_rng(seed))
    assert lp.dyadic_reconstruction_residual(f) <= 1e-12


@given(seeds, st.integers(1, 12))
def test_continuous_reconstruction(seed, tb):
    f = random_spectral(tb, np.random.default_rng(seed))
    out, res = lp.continuous_reconstruction(f)
    assert res < 1e-10
    assert np.abs(out.coeffs - f.coeffs).max() < 1e-10 * np.abs(f.coeffs).max()


@pytest.mark.parametrize("t", [1.0, 1.7, 2.0, 4.0, 5.5, 8.0])
def test_block_support_is_the_annulus(t, rng):
    f = random_spectral(24, rng)
    b = lp.lp_block(t, f)
    lam = size(packed_spins(24))
    outside = (lam < t / 2) | (lam > t)
    assert np.all(b.coeffs[outside] == 0)


@pytest.mark.parametrize("s", sorted(SQUARE_BRACKETS))
def test_square_function_bracket_is_frozen(s):
    lo, hi = lp.square_function_bracket(64, s)
    flo, fhi = SQUARE_BRACKETS[s]
    assert flo <= lo and hi <= fhi
    assert abs(lo - flo) < 1e-4 and abs(hi - fhi) < 1e-4


@pytest.mark.parametrize("s", sorted(SQUARE_BRACKETS))
@given(seed=seeds)
def test_square_function_equivalence(s, seed):
    f = random_spectral(16, np.random.default_rng(seed), decay=float(np.random.default_rng(seed).uniform(-2, 2)))
    ratio = lp.square_function(f, s) / sobolev_norm(f, s)
    lo, hi = SQUARE_BRACKETS[s]
    assert lo - 1e-12 <= ratio <= hi + 1e-12


@pytest.mark.parametrize("t", [2.0, 4.0, 8.0])
def test_bernstein(t, rng):
    f = lp.lp_block(t, random_spectral(40, rng))
    for s in (-1.0, 1.0, 2.0):
        ratio = lp.bernstein_check(f, s, t)
        # <xi> lies between t/2 and sqrt(1 + t^2) on the annulus
        lo, hi = sorted([(0.5) ** s, (np.sqrt(1 + t * t) / t) ** s])
        assert lo - 1e-12 <= ratio <= hi + 1e-12


def test_kernel_integrates_to_symbol_at_zero():
    grid = grid_for_total(16)
    k, diag = lp.kernel_profile(lp.WINDOWS.phi, 2.0, grid, two_b=8)
    assert abs(grid.integrate(k.values) - 1.0) < 1e-12
    assert diag["L1"] >= 1.0 - 1e-12


def test_zygmund_norm_of_constant():
    assert abs(lp.zygmund_norm(SpectralFunction.constant(3.0, 4), 1.0) - 3.0) < 1e-12


def test_zygmund_witness_norm_does_not_grow(rng):
    n8 = lp.zygmund_norm(lp.zygmund_witness(1.0, 8, np.random.default_rng(0)), 1.0)
    n16 = lp.zygmund_norm(lp.zygmund_witness(1.0, 16, np.random.default_rng(0)), 1.0)
    assert n16 / n8 < 2.0


def test_shells_partition_the_band():
    spins = np.concatenate([lp.shell_spins(k, 16) for k in range(-1, 5)])
    assert sorted(spins) == list(range(17))


def test_lp_table_columns(rng):
    rows = lp.lp_table(random_spectral(6, rng), 1.0)
    assert set(rows[0]) == {"t", "L2", "Linf", "Hs"}
    assert all(r["Linf"] >= 0 for r in rows)


@given(st.lists(st.floats(1.0, 300.0), min_size=1, max_size=5))
def test_t_lattice_integrates_dt_over_t(vals):
    t, w = lp.t_lattice(vals, 400.0)
    assert abs(w.sum() - np.log(400.0)) < 1e-12
    assert t.min() >= 1.0 and t.max() <= 400.0
