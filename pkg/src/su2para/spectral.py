"""Clebsch-Gordan tables, product localization and Weyl counting."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .fourier import (SpectralFunction, block_view, packed_spins, plancherel_weights,
                      product_coeffs)
from .group import two
from .irreps import dim, size


# ---------------------------------------------------------------- Clebsch-Gordan

def _fact(n2: int) -> int:
    """(n2/2)! for even n2 >= 0."""
    assert n2 % 2 == 0 and n2 >= 0
    return math.factorial(n2 // 2)


def cg_coefficient(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> float:
    """<j1 m1 j2 m2 | J M> from the Racah sum, evaluated in exact rationals.

    All arguments are doubled.  The alternating sum is formed exactly, so no
    cancellation error occurs; the only rounding is the final square root.
    """
    if tm1 + tm2 != tM:
        return 0.0
    if not (abs(tj1 - tj2) <= tJ <= tj1 + tj2) or (tj1 + tj2 + tJ) % 2:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0.0
    pre = Fraction((tJ + 1) * _fact(tJ + tj1 - tj2) * _fact(tJ - tj1 + tj2) * _fact(tj1 + tj2 - tJ),
                   _fact(tj1 + tj2 + tJ + 2))
    pre *= (_fact(tJ + tM) * _fact(tJ - tM) * _fact(tj1 - tm1) * _fact(tj1 + tm1)
            * _fact(tj2 - tm2) * _fact(tj2 + tm2))
    total = Fraction(0)
    k = 0
    while True:
        args = [tj1 + tj2 - tJ - 2 * k, tj1 - tm1 - 2 * k, tj2 + tm2 - 2 * k,
                tJ - tj2 + tm1 + 2 * k, tJ - tj1 - tm2 + 2 * k]
        if min(args[:3]) < 0:
            break
        if min(args[3:]) >= 0:
            den = math.factorial(k)
            for a in args:
                den *= _fact(a)
            total += Fraction((-1) ** k, den)
        k += 1
    val = math.sqrt(pre * total * total)
    return math.copysign(val, float(total))


@dataclass(frozen=True)
class CGTable:
    """Coupling matrices: ``blocks[two_J]`` has shape (2J+1, d1*d2).

    Columns follow the Kronecker order (m1 major, m2 minor), rows m = -J..J.
    Stacking the blocks gives a real orthogonal U with
    ``D^{j1} (x) D^{j2} = U^T (direct sum D^J) U``.
    """

    two_j1: int
    two_j2: int
    blocks: dict

    def stacked(self) -> np.ndarray:
        return np.vstack([self.blocks[k] for k in sorted(self.blocks)])

    def spins(self) -> list[int]:
        return sorted(self.blocks)


@lru_cache(maxsize=None)
def _cg_table(tj1: int, tj2: int) -> CGTable:
    d1, d2 = tj1 + 1, tj2 + 1
    blocks = {}
    for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2):
        M = np.zeros((tJ + 1, d1 * d2))
        for iM, tM in enumerate(range(-tJ, tJ + 1, 2)):
            for i1, tm1 in enumerate(range(-tj1, tj1 + 1, 2)):
                tm2 = tM - tm1
                if abs(tm2) > tj2:
                    continue
                i2 = (tm2 + tj2) // 2
                M[iM, i1 * d2 + i2] = cg_coefficient(tj1, tm1, tj2, tm2, tJ, tM)
        M.setflags(write=False)
        blocks[tJ] = M
    return CGTable(tj1, tj2, blocks)


def cg_table(j1, j2) -> CGTable:
    return _cg_table(two(j1), two(j2))


def cg_table2(tj1: int, tj2: int) -> CGTable:
    return _cg_table(tj1, tj2)


def cg_recurrence_residual(tj1: int, tj2: int, tJ: int) -> float:
    """Residual of the lowering-operator recurrence across a whole CG block.

    J_- |J M> = sqrt((J+M)(J-M+1)) |J M-1> with J_- = J_-^{(1)} + J_-^{(2)}
    acting on the coupled vectors.  This is an independent consistency
    check of the closed-form coefficients.
    """
    from .irreps import spin_matrices
    U = _cg_table(tj1, tj2).blocks[tJ]
    def lower(tj):
        jx, jy, _ = spin_matrices(tj)
        return (jx - 1j * jy).real
    Lm = np.kron(lower(tj1), np.eye(tj2 + 1)) + np.kron(np.eye(tj1 + 1), lower(tj2))
    J = tJ / 2
    res = 0.0
    for iM in range(1, tJ + 1):
        M = -J + iM
        lhs = Lm @ U[iM]
        rhs = np.sqrt((J + M) * (J - M + 1)) * U[iM - 1]
        res = max(res, float(np.abs(lhs - rhs).max()))
    return res


# ---------------------------------------------------------------- localization

def product_support(j1, j2) -> list[Fraction]:
    t1, t2 = two(j1), two(j2)
    return [Fraction(t, 2) for t in range(abs(t1 - t2), t1 + t2 + 1, 2)]


def spectral_mass(f: SpectralFunction) -> np.ndarray:
    """Plancherel mass per spin (index two_j)."""
    w = plancherel_weights(f.two_b) * np.abs(f.coeffs) ** 2
    return np.bincount(packed_spins(f.two_b), weights=w, minlength=f.two_b + 1)


def support(f: SpectralFunction, tol: float = 1e-10) -> list[Fraction]:
    """Spins carrying relative mass above ``tol``."""
    m = spectral_mass(f)
    tot = m.sum()
    if tot == 0:
        return []
    return [Fraction(t, 2) for t in np.nonzero(m > tol * tot)[0]]


@dataclass
class LocalizationReport:
    inside_mass: float
    outside_mass: float
    support: list
    expected: list
    size_ratio: float | None  # min |eta| over the support divided by ||xi1|-|xi2||

    def to_json(self) -> str:
        return json.dumps({"inside_mass": self.inside_mass, "outside_mass": self.outside_mass,
                           "support": [str(s) for s in self.support],
                           "expected": [str(s) for s in self.expected],
                           "size_ratio": self.size_ratio})


def verify_spec_prd(f: SpectralFunction, g: SpectralFunction, tol: float = 1e-10) -> LocalizationReport:
    """Check that the product of two single-spin functions stays in the triangle range."""
    sf = [s for s in support(f, 0.0)]
    sg = [s for s in support(g, 0.0)]
    if len(sf) != 1 or len(sg) != 1:
        raise ValueError("verify_spec_prd expects functions supported on a single spin")
    j1, j2 = sf[0], sg[0]
    c, tb, _ = product_coeffs(f.coeffs, f.two_b, g.coeffs, g.two_b)
    prod = SpectralFunction(tb, c)
    mass = spectral_mass(prod)
    total = mass.sum()
    allowed = [two(s) for s in product_support(j1, j2)]
    inside = float(mass[allowed].sum() / total) if total else 0.0
    outside = float((total - mass[allowed].sum()) / total) if total else 0.0
    supp = support(prod, tol)
    gap = abs(size(two(j1)) - size(two(j2)))
    ratio = None
    if gap > 0 and supp:
        ratio = float(min(size(two(s)) for s in supp) / gap)
    return LocalizationReport(inside, max(outside, 0.0), supp, product_support(j1, j2), ratio)


def random_single_spin(two_j: int, rng: np.random.Generator) -> SpectralFunction:
    d = two_j + 1
    blk = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return SpectralFunction.from_blocks({two_j: blk}, two_j)


# ---------------------------------------------------------------- Weyl law

def weyl_count(t: float) -> tuple[float, float]:
    """Number of Fourier modes with |xi| <= t, and its ratio to t^3."""
    count = 0
    tj = 0
    while size(tj) <= t:
        count += (tj + 1) ** 2
        tj += 1
    return float(count), float(count) / t ** 3


def weyl_closed_form(t: float) -> float:
    """Same count via D(D+1)(2D+1)/6 with D the largest admissible dimension."""
    # |xi| <= t  <=>  j(j+1) <= 2 kappa t^2
    from .config import SETTINGS
    j = (-1 + math.sqrt(1 + 8 * SETTINGS.metric_scale * t * t)) / 2
    D = int(math.floor(2 * j + 1e-12)) + 1
    while D > 1 and size(D - 1) > t:
        D -= 1
    while size(D) <= t:
        D += 1
    return D * (D + 1) * (2 * D + 1) / 6
