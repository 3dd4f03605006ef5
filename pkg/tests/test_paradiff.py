import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from su2para import paradiff as pd
from su2para import symbols as sy
from su2para.fourier import (SpectralFunction, inner, multiply, packed_spins, random_spectral,
                             resize_packed, sobolev_norm)
from su2para.irreps import bracket, lie_basis, size
from su2para.littlewood_paley import WINDOWS, low_pass

seeds = st.integers(0, 2 ** 32 - 1)


# ---------------------------------------------------------------- weights and para-products

@pytest.mark.parametrize("gap", [2.0, 8.0])
@pytest.mark.parametrize("ta,tu", [(4, 4), (6, 10), (16, 16)])
def test_weights_reconstruct_one(gap, ta, tu):
    # c(eta, xi) + c(xi, eta) + r(eta, xi) = 1 checks two independently assembled integrals
    c = pd.pair_weights(ta, tu, gap)
    ct = pd.pair_weights(tu, ta, gap).T
    r = pd.remainder_weights(ta, tu, gap)
    assert np.abs(c + ct + r - 1).max() < 1e-10


def test_pair_weights_vanish_without_gap():
    gap = 8.0
    c = pd.pair_weights(16, 16, gap)
    la, lu = size(np.arange(17)), size(np.arange(17))
    far = gap * la[:, None] >= 2 * lu[None, :]
    assert np.abs(c[far]).max() < 1e-15


@given(seeds)
def test_para_decomposition_reconstructs_product(seed):
    r = np.random.default_rng(seed)
    a, u = random_spectral(4, r), random_spectral(5, r)
    dec = pd.para_decompose(a, u)
    assert dec.residual <= 1e-9


def test_paraproduct_with_constant_coefficient(rng):
    u = random_spectral(8, rng)
    got = pd.paraproduct(SpectralFunction.constant(2.0, 0), u)
    want = 2.0 * (u - low_pass(1.0, u))
    assert np.abs(got.coeffs - resize_packed(want.coeffs, 8, got.two_b)).max() < 1e-10


def test_paraproduct_symbol_matches_bilinear(rng):
    a, u = random_spectral(4, rng, real=True), random_spectral(6, rng)
    direct = pd.paraproduct(a, u)
    via = sy.quantize(pd.paraproduct_symbol(a, 6), u)
    n = min(direct.two_b, via.two_b)
    assert np.abs(resize_packed(direct.coeffs, direct.two_b, n) - resize_packed(via.coeffs, via.two_b, n)).max() < 1e-10
    assert sobolev_norm(direct) - sobolev_norm(SpectralFunction(n, resize_packed(direct.coeffs, direct.two_b, n))) < 1e-12


# ---------------------------------------------------------------- Bony

@pytest.mark.parametrize("F", [[0, 0, 1], [0, 0, 0, 1], [1, -2, 0.5, 0.3]])
def test_bony_identity(F, rng):
    u = random_spectral(6, rng, real=True, decay=2.0)
    res = pd.bony_linearize(F, u, r=None)
    assert res.residual <= 1e-8


def test_bony_linear_symbol_is_constant(rng):
    u = random_spectral(4, rng, real=True)
    res = pd.bony_linearize([0.0, 3.0], u, r=None)
    assert res.symbol.two_x == 0
    assert np.abs(res.symbol.data - 3.0 * sy.Symbol.multiplier(
        lambda tj: 1.0 - WINDOWS.phi(size(tj)), 4).data).max() < 1e-10


# ---------------------------------------------------------------- cutoffs

@pytest.mark.parametrize("kind", ["ratio", "lp"])
@given(mu=st.floats(0, 50), lam=st.floats(0, 50), delta=st.floats(0.02, 0.45))
def test_cutoff_plateau_and_support(kind, mu, lam, delta):
    chi = pd.AdmissibleCutoff(delta, kind=kind)
    v = float(chi(mu, lam))
    br = np.sqrt(1 + lam * lam)
    assert -1e-12 <= v <= 1 + 1e-10
    if mu <= chi.plateau * br * (1 - 1e-9):
        assert abs(v - 1) < 1e-9
    if mu >= delta * br:
        assert abs(v) < 1e-12


@pytest.mark.parametrize("kind", ["ratio", "lp"])
def test_admissible_cutoff_self_check(kind):
    chi = pd.admissible_cutoff(1 / 16, kind=kind)
    assert np.isfinite(chi.decay_constant())


def test_cutoff_parameter_range():
    with pytest.raises(pd.CutoffError):
        pd.admissible_cutoff(0.6)


def test_regularize_keeps_x_independent_symbols(rng):
    a = sy.Symbol.vector_field(lie_basis()[0], 8)
    assert np.array_equal(pd.regularize(a, pd.admissible_cutoff(1 / 16)).data, a.data)


@given(seeds, st.sampled_from([1 / 16, 0.2, 0.45]))
def test_regularized_symbols_pass_spectral_condition(seed, delta):
    r = np.random.default_rng(seed)
    data = r.standard_normal((len(packed_spins(12)), len(packed_spins(6))))
    a = sy.Symbol(12, 6, data)
    rep = pd.spectral_condition_check(pd.regularize(a, pd.admissible_cutoff(delta)), delta)
    assert rep.passed and rep.offending_mass <= 1e-12


def test_multiplier_passes_for_any_delta():
    a = sy.Symbol.multiplier(bracket(np.arange(9)), 8)
    for delta in (1e-3, 0.1, 0.4):
        assert pd.spectral_condition_check(a, delta).passed


def test_planted_frequency_is_reported():
    a = sy.Symbol.identity(4).with_bands(two_x=6)
    data = a.data.copy()
    data[0, -1] = 1.0                      # spin-3 x-frequency at xi = trivial representation
    rep = pd.spectral_condition_check(sy.Symbol(4, 6, data), 1 / 16)
    assert not rep.passed
    assert (6, 0) in [(e, x) for e, x, _ in rep.offending]


def test_spectral_condition_closure():
    cfg = pd.ParadiffSettings(bands=(8, 12))
    recs = pd.spectral_condition_probe(cfg, deltas=(0.45,))
    assert all(r["pass"] for r in recs)
    measured = {r["case"]: r["measured_parameter"] for r in recs}
    assert measured["regularized"] > 0


# ---------------------------------------------------------------- composition and adjoint

def _coef(rng, tb=2):
    return random_spectral(tb, rng, real=True)


def test_compose_reduces_to_product_below_order_one(rng):
    a = sy.Symbol.vector_field(lie_basis()[0], 6).times_function(_coef(rng))
    b = sy.Symbol.multiplier(bracket(np.arange(7)), 6).times_function(_coef(rng))
    got = pd.compose_sharp(a, b, 0.5)
    assert np.abs(got.data - a.matmul(b).data).max() < 1e-12


def test_compose_with_x_independent_right_factor(rng):
    a = sy.Symbol.multiplier(bracket(np.arange(7)), 6).times_function(_coef(rng))
    b = sy.Symbol.vector_field(lie_basis()[1], 6)
    got = pd.compose_sharp(a, b, 2.0, sy.taylor_operators(None, 3))
    assert np.abs(got.data - a.matmul(b).data).max() < 1e-12


def test_first_order_composition_is_exact_for_linear_symbols(rng):
    # a = c1 sigma_X is linear in xi, so a #_1 b quantizes to Op(a) Op(b) exactly
    a = sy.Symbol.vector_field(lie_basis()[0], 8).times_function(_coef(rng, 1))
    b = sy.Symbol.multiplier(bracket(np.arange(9)), 8).times_function(_coef(rng, 1))
    ab = pd.compose_sharp(a, b, 1.0)
    f = random_spectral(4, rng)
    lhs = sy.quantize(a, sy.quantize(b, f))
    rhs = sy.quantize(ab, f)
    n = min(lhs.two_b, rhs.two_b)
    assert np.abs(resize_packed(lhs.coeffs, lhs.two_b, n) - resize_packed(rhs.coeffs, rhs.two_b, n)).max() < 1e-9


def test_real_multiplier_is_self_adjoint():
    a = sy.Symbol.multiplier(bracket(np.arange(9)), 8)
    assert np.abs(pd.adjoint_symbol(a, 1.0).data - a.data[: a.data.shape[0]]).max() < 1e-12


def test_operator_adjoint_inner_products(rng):
    a = sy.Symbol.vector_field(lie_basis()[2], 6).times_function(_coef(rng, 2)) * 1j
    M = pd.symbol_matrix(a, 6)
    Ms = M.adjoint()
    for _ in range(3):
        u, v = random_spectral(6, rng), random_spectral(M.two_out, rng)
        assert abs(inner(M.apply(u), v) - inner(u, Ms.apply(v))) < 1e-10


def test_first_order_adjoint_symbol_is_exact(rng):
    a = sy.Symbol.vector_field(lie_basis()[0], 8).times_function(_coef(rng, 1)) * 1j
    bullet = pd.adjoint_symbol(a, 1.0)
    Mstar = pd.symbol_matrix(a, 7).adjoint().resized(two_in=6)
    Mb = pd.symbol_matrix(bullet, 6)
    n = min(Mstar.two_out, Mb.two_out)
    assert np.abs(Mstar.resized(two_out=n).raw - Mb.resized(two_out=n).raw).max() < 1e-10


# ---------------------------------------------------------------- operator matrices

def test_identity_norm_is_one():
    I = pd.multiplier_matrix(np.ones(9), 8)
    for s in (-2.0, 0.0, 3.0):
        assert abs(pd.op_norm(I.with_weights(s, s)) - 1) < 1e-12


def test_gradient_power_norm():
    for m in (0.5, 1.0, 2.0):
        M = pd.multiplier_matrix(size(np.arange(13)) ** m, 12)
        assert pd.op_norm(M.with_weights(1.0 + m, 1.0)) <= 1 + 1e-12


def test_black_box_matrix_matches_symbol_matrix(rng):
    a = sy.Symbol.vector_field(lie_basis()[1], 4).times_function(_coef(rng, 1))
    M1 = pd.symbol_matrix(a, 4)
    M2 = pd.operator_matrix(lambda f: sy.quantize(a, f), 4, M1.two_out)
    assert np.abs(M1.raw - M2.raw).max() < 1e-12
    assert M2.truncated_mass == 0.0


def test_truncation_is_flagged(rng):
    a = sy.Symbol.identity(4).times_function(_coef(rng, 2))
    M = pd.operator_matrix(lambda f: sy.quantize(a, f), 4, 4)
    assert M.truncated_mass > 1e-9


def test_matrix_composition(rng):
    a = sy.Symbol.vector_field(lie_basis()[0], 8).times_function(_coef(rng, 1))
    A = pd.symbol_matrix(a, 5)
    B = pd.symbol_matrix(a, 4)
    f = random_spectral(4, rng)
    assert np.abs((A @ B).apply(f).coeffs - A.apply(B.apply(f)).coeffs).max() < 1e-12


def test_norm_is_largest_singular_value(rng):
    raw = rng.standard_normal((14, 14)) + 1j * rng.standard_normal((14, 14))
    M = pd.OperatorMatrix(2, 2, raw)
    assert abs(pd.op_norm(M) - np.linalg.norm(M.entries, 2)) < 1e-12


def test_probe_csv_columns():
    row = pd.ProbeRow("x", 8, 0.0, 1.0, 0.0, 1.0, 0.0625, 8.0, 1.5, 2.0, True)
    text = pd.rows_to_csv([row])
    reader = csv.DictReader(io.StringIO(text))
    assert tuple(reader.fieldnames) == pd.CSV_COLUMNS
    assert next(reader)["pass"] == "True"


def test_contrast_rule_uses_fit_tolerance():
    cfg = pd.ParadiffSettings(bands=(8, 16), r=1.0)
    ok = pd._contrast_rows("c", {8: 1.0, 16: 0.5}, cfg, 0.0)
    bad = pd._contrast_rows("c", {8: 1.0, 16: 1.0}, cfg, 0.0)
    assert all(r.passed for r in ok) and not any(r.passed for r in bad)
    zero = pd._ratio_rows("b", {8: 0.0, 16: 0.0}, cfg, 0.0)
    assert all(r.passed for r in zero)
