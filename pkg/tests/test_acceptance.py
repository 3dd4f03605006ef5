"""Thirteen acceptance criteria at their stated tolerances, one PASS/FAIL line each."""
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from frozen import SQUARE_BRACKETS, WEYL_BRACKET
from su2para import SETTINGS, fourier, group, irreps, metric_scale, paradiff, spectral, symbols
from su2para import littlewood_paley as lp
from su2para.fourier import packed_spins, random_spectral, sobolev_norm
from su2para.irreps import size


def test_quadrature_and_plancherel(report):
    t0 = time.perf_counter()
    grid = group.haar_grid(8)
    schur = grid.schur_residual()
    tb = 16
    pgrid = group.grid_for_total(2 * tb)
    plan = 0.0
    for seed in range(50):
        f = random_spectral(tb, np.random.default_rng(seed))
        vals = fourier.inverse_values(pgrid, f.coeffs, tb)
        l2 = np.sqrt(pgrid.integrate(np.abs(vals) ** 2))
        plan = max(plan, abs(l2 - fourier.plancherel_norm(f)) / fourier.plancherel_norm(f))
    elapsed = time.perf_counter() - t0
    ok = schur <= 1e-10 and plan <= 1e-10 and elapsed < 30
    report(1, "quadrature / Peter-Weyl", ok,
           f"schur {schur:.1e}, plancherel {plan:.1e} over 50 seeds, {elapsed:.1f} s")
    assert ok


def test_representation_identities(report):
    rng = np.random.default_rng(2)
    u, v = group.random_matrices(100, rng), group.random_matrices(100, rng)
    hom = max(float(np.abs(irreps.wigner_matrices(tj, u @ v)
                           - irreps.wigner_matrices(tj, u) @ irreps.wigner_matrices(tj, v)).max())
              for tj in range(9))
    cas, closed = 0.0, True
    for kappa in (1.0, 2.5):
        with metric_scale(kappa):
            for tj in range(13):
                lam = irreps.laplace_eigenvalue2(tj)
                j = Fraction(tj, 2)
                closed &= lam == float(j * (j + 1)) / (2 * kappa)
                cas = max(cas, float(np.abs(irreps.casimir(tj) + lam * np.eye(tj + 1)).max()))
    ok = hom <= 1e-12 and cas <= 1e-12 and closed
    report(2, "representation identities", ok,
           f"homomorphism {hom:.1e}, casimir {cas:.1e}, closed-form eigenvalues {closed}")
    assert ok


def test_spectral_localization(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for tj1, tj2 in itertools.product(range(9), repeat=2):
        f, g = spectral.random_single_spin(tj1, rng), spectral.random_single_spin(tj2, rng)
        worst = max(worst, spectral.verify_spec_prd(f, g).outside_mass)
    ok = worst <= 1e-10
    report(3, "spectral localization", ok, f"max outside mass {worst:.1e} over j1, j2 <= 4")
    assert ok


def test_leibniz(report):
    rng = np.random.default_rng(4)
    x, y = group.random_matrices(1000, rng), group.random_matrices(1000, rng)
    res = symbols.leibniz_check(symbols.FundamentalTuple(), x, y)
    ok = res <= 1e-13
    report(4, "Leibniz identity", ok, f"max residual {res:.1e} over 1000 pairs")
    assert ok


def test_taylor_machinery(report):
    parts, ok = [], True
    for N in (1, 2, 3):
        T = symbols.taylor_operators(None, N)
        bio = T.biorthogonality_residual()
        _, _, slope = symbols.taylor_remainder_sweep(T, seed=5)
        ok &= bio <= 1e-10 and abs(slope - N) <= 0.2
        parts.append(f"N={N} bio {bio:.1e} slope {slope:.3f}")
    report(5, "Taylor machinery", ok, ", ".join(parts))
    assert ok


def test_littlewood_paley(report):
    rng = np.random.default_rng(6)
    f = random_spectral(32, rng)
    recon = lp.dyadic_reconstruction_residual(f)
    lam = size(packed_spins(32))
    leak = 0.0
    for t in 2.0 ** np.arange(0, 6):
        b = lp.lp_block(t, f)
        leak = max(leak, float(np.abs(b.coeffs[(lam < t / 2) | (lam > t)]).max(initial=0)))
    inside = True
    for s, (lo, hi) in SQUARE_BRACKETS.items():
        blo, bhi = lp.square_function_bracket(64, s)
        inside &= lo <= blo and bhi <= hi
        for _ in range(5):
            g = random_spectral(16, rng, decay=float(rng.uniform(-2, 2)))
            ratio = lp.square_function(g, s) / sobolev_norm(g, s)
            inside &= lo - 1e-12 <= ratio <= hi + 1e-12
    ok = recon <= 1e-12 and leak == 0.0 and inside
    report(6, "Littlewood-Paley", ok,
           f"reconstruction {recon:.1e}, block leakage {leak:.1e}, square function in frozen brackets {inside}")
    assert ok


def test_multiplier_decay(report):
    reps = [symbols.multiplier_decay(m, o) for m in (-1.0, 0.5, 1.0, 2.0) for o in range(3)]
    worst = max(abs(r.slope - r.claimed) for r in reps)
    ok = all(r.passed for r in reps)
    report(7, "multiplier decay", ok, f"max |slope - (m - |beta|)| = {worst:.3f} over {len(reps)} fits, "
           f"window j in {SETTINGS.fit_window}")
    assert ok


def test_weyl_bracket(report):
    ts = np.linspace(5.0, 20.0, 301)
    r = np.array([spectral.weyl_count(t)[1] for t in ts])
    ok = WEYL_BRACKET[0] <= r.min() and r.max() <= WEYL_BRACKET[1] and WEYL_BRACKET[1] / WEYL_BRACKET[0] <= 3
    report(8, "Weyl count", ok, f"count/t^3 in [{r.min():.4f}, {r.max():.4f}] within frozen {WEYL_BRACKET}")
    assert ok


# ---------------------------------------------------------------- para-differential probes

class _Probes:
    """Runs each probe once per session and keeps its wall time."""

    def __init__(self):
        self.rows, self.times = {}, {}

    def __call__(self, name, fn):
        if name not in self.rows:
            t0 = time.perf_counter()
            self.rows[name] = fn(paradiff.PARADIFF)
            self.times[name] = time.perf_counter() - t0
        return self.rows[name]


@pytest.fixture(scope="module")
def probes():
    return _Probes()


def _summary(rows):
    bounded = [r for r in rows if not r.probe.endswith("_contrast") and r.passed is not None]
    contrast = [r for r in rows if r.probe.endswith("_contrast")]
    return all(r.passed for r in bounded), all(r.passed for r in contrast) if contrast else None


def test_paraproduct_boundedness(report, probes):
    cfg = paradiff.PARADIFF
    para = probes("paraproduct", paradiff.paraproduct_probe)
    rem = probes("remainder", paradiff.remainder_probe)
    rng = np.random.default_rng(9)
    dec = max(paradiff.para_decompose(random_spectral(8, rng, real=True), random_spectral(8, rng)).residual
              for _ in range(3))
    norms = {(r.s, r.band): r.measured_norm for r in para}
    ratios = [norms[s, cfg.bands[1]] / norms[s, cfg.bands[0]] for s in cfg.s_values]
    ok = all(r.passed for r in para) and all(r.passed for r in rem if r.passed is not None) and dec <= 1e-9
    report(9, "para-product boundedness", ok,
           f"|T_a|/|a|_inf ratios {np.round(ratios, 3).tolist()}, decomposition {dec:.1e}, "
           f"remainder smoothing bounded {all(r.passed for r in rem if r.passed is not None)}")
    assert ok


def test_bony_identity(report):
    u = random_spectral(12, np.random.default_rng(10), real=True, decay=2.0)
    res = {k: paradiff.bony_linearize([0] * k + [1], u, r=None).residual for k in (2, 3)}
    ok = max(res.values()) <= 1e-8
    report(10, "Bony identity", ok, f"B = 6, residual z^2 {res[2]:.1e}, z^3 {res[3]:.1e}")
    assert ok


def test_spectral_condition_machinery(report):
    recs = paradiff.spectral_condition_probe(paradiff.PARADIFF)
    worst = max(r["offending_mass"] for r in recs)
    ok = all(r["pass"] for r in recs)
    report(11, "spectral condition", ok,
           f"{len(recs)} checks (regularized, difference, derivative), max offending mass {worst:.1e}")
    assert ok


CALCULUS_PROBES = {
    "composition": paradiff.composition_probe,
    "commutator": paradiff.commutator_probe,
    "adjoint": paradiff.adjoint_probe,
    "cutoff_freedom": paradiff.cutoff_freedom_probe,
    "a_minus_achi": paradiff.regularization_op_probe,
}


def test_calculus_probes(report, probes):
    parts, ok = [], True
    for name, fn in CALCULUS_PROBES.items():
        rows = probes(name, fn)
        b, c = _summary(rows)
        ok &= b and c is not False
        parts.append(f"{name} bounded {'ok' if b else 'FAIL'} contrast {'ok' if c else 'FAIL'}")
        for r in rows:
            print(f"  {r.probe:26s} band {r.band:2d} s {r.s:+.0f} norm {r.measured_norm:.4e} pass {r.passed}")
    total = sum(probes.times.values())
    ok &= total < 600
    report(12, "calculus probes", ok, "; ".join(parts) + f"; probe suite {total:.0f} s")
    assert ok


def test_quasi_homogeneous_orders(report):
    reps = [symbols.quasi_homogeneous_probe(m, o) for m in (0.0, 1.0, -1.0) for o in range(3)]
    reps.append(symbols.commutator_order_probe())
    dk = [symbols.dkappa_probe(m) for m in (1.0, 2.0, -1.0)]
    zero = float(dk[0].norms.max())
    ok = all(r.passed for r in reps + dk) and zero == 0.0
    worst = max(abs(r.slope - r.claimed) for r in reps[:-1])
    report(13, "quasi-homogeneous orders", ok,
           f"max |slope - claimed| {worst:.3f}, commutator slope {reps[-1].slope:.3f}, "
           f"dkappa m=1 max norm {zero:.1e}, dkappa slopes {[round(r.slope, 3) for r in dk[1:]]}")
    assert ok
