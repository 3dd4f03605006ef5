"""Para-products, Bony para-linearization, admissible cutoffs and calculus probes.

Every bilinear LP construction here reduces to scalar pair weights.  With
``a = sum_eta a_eta`` and ``u = sum_xi u_xi`` split by spin,

    T_a u = sum_{eta, xi} c(eta, xi) a_eta u_xi,
    c(eta, xi) = int_1^inf phi(gap |eta| / t) psi(|xi| / t) dt / t,

and the weights are computed once on the breakpoint-aligned t lattice.
Operator norms are measured on dense matrices in Plancherel coordinates
``sqrt(d_xi) <xi>^s f^(xi)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, asdict

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from .config import SETTINGS
from .fourier import (SpectralFunction, block_view, forward_values, inverse_values, multiply,
                      packed_size, packed_spins, plancherel_weights, resize_packed, sobolev_norm)
from .group import grid_for_total
from .irreps import bracket, lie_basis, size
from .littlewood_paley import (WINDOWS, WindowPair, sup_norm, t_lattice, zygmund_witness)
from .symbols import (Symbol, TaylorOperators, _block_slice, difference_multi, quantize_columns,
                      taylor_operators)


# ---------------------------------------------------------------- pair weights

def _lattice_for(two_a: int, two_u: int, gap: float, windows: WindowPair):
    la = size(np.arange(two_a + 1))
    lu = size(np.arange(two_u + 1))
    vals = np.concatenate([lu, gap * la, la, gap * lu])
    t_max = max(2.0, 2.0 * gap * max(la.max(), lu.max()) / windows.inner)
    return t_lattice(vals[vals > 0], t_max, scales=(1.0 / windows.outer, 1.0 / windows.inner)), la, lu


def pair_weights(two_a: int, two_u: int, gap: float, windows: WindowPair = WINDOWS) -> np.ndarray:
    """``c[eta, xi]`` of the para-product (rows: spins of the coefficient)."""
    (t, w), la, lu = _lattice_for(two_a, two_u, gap, windows)
    low = windows.phi(gap * la[:, None] / t[None, :])        # (na, nt)
    band = windows.psi(lu[:, None] / t[None, :])             # (nu, nt)
    return (low * w) @ band.T


def remainder_weights(two_a: int, two_u: int, gap: float, windows: WindowPair = WINDOWS) -> np.ndarray:
    """Weights of R(a, u) from the differentiated product A_t U_t (independent of pair_weights)."""
    (t, w), la, lu = _lattice_for(two_a, two_u, gap, windows)
    phi, psi = windows.phi, windows.psi
    A = phi(la[:, None] / t) - phi(gap * la[:, None] / t)
    U = phi(lu[:, None] / t) - phi(gap * lu[:, None] / t)
    r = (psi(la[:, None] / t) * w) @ U.T + (A * w) @ psi(lu[:, None] / t).T
    return r + phi(la)[:, None] * phi(lu)[None, :]


def bilinear(a: SpectralFunction, u: SpectralFunction, W: np.ndarray) -> SpectralFunction:
    """``sum_{eta, xi} W[eta, xi] a_eta u_xi`` computed exactly on a product grid."""
    full = a.two_b + u.two_b
    grid = grid_for_total(2 * full)
    sa = packed_spins(a.two_b)
    su = packed_spins(u.two_b)
    acc = np.zeros(grid.shape, dtype=complex)
    for tj in range(u.two_b + 1):
        uc = np.where(su == tj, u.coeffs, 0.0)
        if not np.any(uc) or not np.any(W[:, tj]):
            continue
        ac = a.coeffs * W[sa, tj]
        acc += inverse_values(grid, ac, a.two_b) * inverse_values(grid, uc, u.two_b)
    return SpectralFunction(full, forward_values(grid, acc, full))


def paraproduct(a: SpectralFunction, u: SpectralFunction, gap: float | None = None,
                windows: WindowPair = WINDOWS) -> SpectralFunction:
    """T_a u: low frequencies of a against the LP blocks of u."""
    gap = PARADIFF.gap if gap is None else gap
    return bilinear(a, u, pair_weights(a.two_b, u.two_b, gap, windows))


@dataclass
class ParaDecomposition:
    t_au: SpectralFunction
    t_ua: SpectralFunction
    remainder: SpectralFunction
    residual: float        # relative H^0 misfit of the three parts against a*u
    remainder_ratio: float  # ||R||_{H^s} / (|a|_inf ||u||_{H^s})


def para_decompose(a: SpectralFunction, u: SpectralFunction, gap: float | None = None, s: float = 0.0,
                   windows: WindowPair = WINDOWS) -> ParaDecomposition:
    gap = PARADIFF.gap if gap is None else gap
    tau = paraproduct(a, u, gap, windows)
    tua = paraproduct(u, a, gap, windows)
    rem = bilinear(a, u, remainder_weights(a.two_b, u.two_b, gap, windows))
    prod = multiply(a, u)
    res = sobolev_norm(tau + tua + rem - prod) / max(sobolev_norm(prod), 1e-300)
    ratio = sobolev_norm(rem, s) / (sup_norm(a) * sobolev_norm(u, s))
    return ParaDecomposition(tau, tua, rem, float(res), float(ratio))


def scalar_symbol(a: SpectralFunction, W: np.ndarray, two_xi: int) -> Symbol:
    """Symbol ``sum_eta W[eta, xi] a_eta(x) I``; x-band trimmed to the active spins of a."""
    active = np.nonzero(np.any(W[:, : two_xi + 1] != 0, axis=1))[0]
    tx = int(active.max()) if len(active) else 0
    tx = min(tx, a.two_b)
    ca = resize_packed(a.coeffs, a.two_b, tx)
    sa = packed_spins(tx)
    data = np.zeros((packed_size(two_xi), packed_size(tx)), dtype=complex)
    for tj in range(two_xi + 1):
        d = tj + 1
        col = ca * W[sa, tj]
        blk = np.zeros((d, d, packed_size(tx)), dtype=complex)
        blk[np.arange(d), np.arange(d)] = col
        data[_block_slice(two_xi, tj)] = blk.reshape(d * d, -1)
    return Symbol(two_xi, tx, data)


def paraproduct_symbol(a: SpectralFunction, two_xi: int, gap: float | None = None,
                       windows: WindowPair = WINDOWS) -> Symbol:
    gap = PARADIFF.gap if gap is None else gap
    return scalar_symbol(a, pair_weights(a.two_b, two_xi, gap, windows), two_xi)


def remainder_symbol(a: SpectralFunction, two_xi: int, gap: float | None = None,
                     windows: WindowPair = WINDOWS) -> Symbol:
    """Symbol of u -> R(a, u)."""
    gap = PARADIFF.gap if gap is None else gap
    return scalar_symbol(a, remainder_weights(a.two_b, two_xi, gap, windows), two_xi)


# ---------------------------------------------------------------- Bony

@dataclass
class BonyResult:
    symbol: Symbol
    residual: float          # relative grid sup of F(u) - F(u_1) - Op(l_u) u
    smoothing: float | None  # ||F(u) - F(u_1) - T_{F'(u)} u||_{H^{s+r}}


def bony_linearize(F, u: SpectralFunction, s: float = 0.0, r: float | None = 1.0, gap: float | None = None,
                   windows: WindowPair = WINDOWS) -> BonyResult:
    """Para-linearization symbol ``l_u(x, xi) = int F'(u_t)(x) psi(|xi|/t) dt/t I``.

    ``F`` is a polynomial (coefficients or :class:`numpy.polynomial.Polynomial`)
    and ``u_t = phi(|grad|/t) u``.
    """
    gap = PARADIFF.gap if gap is None else gap
    P = F if isinstance(F, Polynomial) else Polynomial(F)
    dP = P.deriv()
    deg = max(P.degree(), 1)
    tb = u.two_b
    tl = (deg - 1) * tb
    lam = size(np.arange(tb + 1))
    t_max = max(2.0, 2.0 * lam.max() / windows.inner)
    t, w = t_lattice(lam[lam > 0], t_max, scales=(1.0 / windows.outer, 1.0 / windows.inner))
    grid = grid_for_total(2 * max(tl, 1))
    spins = packed_spins(tb)
    comp = np.stack([inverse_values(grid, np.where(spins == k, u.coeffs, 0.0), tb) for k in range(tb + 1)])
    comp = comp.reshape(tb + 1, -1)
    acc = np.zeros((tb + 1, comp.shape[1]), dtype=complex)
    phi_t = windows.phi(lam[None, :] / t[:, None])
    psi_t = windows.psi(lam[None, :] / t[:, None])
    for k in range(len(t)):
        ut = phi_t[k] @ comp
        acc += (w[k] * psi_t[k])[:, None] * dP(ut)[None, :]
    lspec = forward_values(grid, acc.reshape((tb + 1,) + grid.shape), tl)
    data = np.zeros((packed_size(tb), packed_size(tl)), dtype=complex)
    for tj in range(tb + 1):
        d = tj + 1
        blk = np.zeros((d, d, packed_size(tl)), dtype=complex)
        blk[np.arange(d), np.arange(d)] = lspec[tj]
        data[_block_slice(tb, tj)] = blk.reshape(d * d, -1)
    symbol = Symbol(tb, tl, data)

    from .symbols import quantize
    from .littlewood_paley import low_pass
    check_band = deg * tb
    g2 = grid_for_total(2 * check_band)
    uv = inverse_values(g2, u.coeffs, tb)
    u1 = low_pass(1.0, u, windows)
    u1v = inverse_values(g2, u1.coeffs, tb)
    op = quantize(symbol, u)
    opv = inverse_values(g2, op.coeffs, op.two_b)
    lhs = P(uv) - P(u1v)
    residual = float(np.abs(lhs - opv).max() / max(np.abs(P(uv)).max(), 1e-300))

    smoothing = None
    if r is not None:
        dFu = SpectralFunction(tl, forward_values(g2, dP(uv), tl)) if tl > 0 else \
            SpectralFunction.constant(complex(dP(np.zeros(1))[0]), 0)
        para = paraproduct(dFu, u, gap, windows)
        lhs_spec = SpectralFunction(check_band, forward_values(g2, lhs, check_band))
        smoothing = sobolev_norm(lhs_spec - para, s + r)
    return BonyResult(symbol, residual, smoothing)


# ---------------------------------------------------------------- admissible cutoffs

class CutoffError(ValueError):
    pass


@dataclass(frozen=True)
class AdmissibleCutoff:
    """chi(mu, lam) = 1 for |mu| <= plateau <lam>, 0 for |mu| >= delta <lam>.

    ``kind="ratio"``: ``phi(mu / (delta <lam>))`` (plateau delta/2).
    ``kind="lp"``: the para-product weight with gap ``2/delta`` plus a
    low-frequency term ``phi(lam) phi(2 mu / delta)``; it equals 1 for
    mu <= delta max(1, lam) / 4, so its plateau relative to <lam> is delta / (4 sqrt 2).
    """

    delta: float
    gap: float = 8.0
    kind: str = "ratio"
    windows: WindowPair = WINDOWS

    @property
    def plateau(self) -> float:
        return self.delta / 2 if self.kind == "ratio" else self.delta / (4 * np.sqrt(2.0))

    def __call__(self, mu, lam):
        mu = np.abs(np.asarray(mu, dtype=float))
        lam = np.abs(np.asarray(lam, dtype=float))
        br = np.sqrt(1.0 + lam ** 2)
        if self.kind == "ratio":
            return self.windows.phi(mu / (self.delta * br))
        if self.kind != "lp":
            raise CutoffError(f"unknown cutoff kind {self.kind!r}")
        mu, lam = np.broadcast_arrays(mu, lam)
        m, l = mu.ravel(), lam.ravel()
        W = self.windows
        # psi(l/t) dt/t = d phi(l/t) on t in [lo, hi]; phi(k/t) is 0 below k/outer and 1 above k/inner
        lo = np.maximum(1.0, l / W.outer)
        hi = np.maximum(lo, l / W.inner)
        k = 2 * m / self.delta
        a = np.clip(k / W.outer, lo, hi)
        b = np.clip(k / W.inner, lo, hi)
        out = W.phi(l) * W.phi(k) + W.phi(l / hi) - W.phi(l / b)
        mid = b > a
        if mid.any():
            x, w = np.polynomial.legendre.leggauss(4 * SETTINGS.points_per_octave)
            u0, u1 = np.log(a[mid]), np.log(b[mid])
            t = np.exp((x[None, :] + 1) / 2 * (u1 - u0)[:, None] + u0[:, None])
            vals = W.phi(k[mid, None] / t) * W.psi(l[mid, None] / t)
            out[mid] += (vals * w[None, :]).sum(axis=1) * (u1 - u0) / 2
        return out.reshape(mu.shape)

    def table(self, mus, lams) -> np.ndarray:
        return self(np.asarray(mus)[:, None], np.asarray(lams)[None, :])

    def verify(self, lams=None, n_mu: int = 200) -> float:
        """Check plateau and support on a lattice; returns the derivative-decay constant."""
        lams = np.linspace(0, 40, 161) if lams is None else np.asarray(lams, dtype=float)
        br = np.sqrt(1 + lams ** 2)
        frac = np.linspace(0, 1.2, n_mu)
        mus = frac[:, None] * self.delta * br[None, :]
        chi = self(mus, np.broadcast_to(lams, mus.shape))
        plate = frac[:, None] * self.delta <= self.plateau + 1e-12
        supp = frac[:, None] >= 1.0
        if np.abs(chi[np.broadcast_to(plate, chi.shape)] - 1).max(initial=0) > 1e-8:
            raise CutoffError("cutoff is not 1 on its plateau")
        if np.abs(chi[np.broadcast_to(supp, chi.shape)]).max(initial=0) > 1e-8:
            raise CutoffError("cutoff does not vanish beyond delta <lam>")
        return self.decay_constant(lams)

    def decay_constant(self, lams=None, h: float = 1e-4) -> float:
        """max <lam> (|d_mu chi| + |d_lam chi|) over a lattice, by centered differences."""
        lams = np.linspace(0.5, 40, 80) if lams is None else np.asarray(lams, dtype=float)
        br = np.sqrt(1 + lams ** 2)
        mus = np.linspace(0, 1.1, 60)[:, None] * self.delta * br[None, :]
        L = np.broadcast_to(lams, mus.shape)
        dmu = (self(mus + h, L) - self(np.abs(mus - h), L)) / (2 * h)
        dlam = (self(mus, L + h) - self(mus, np.abs(L - h))) / (2 * h)
        return float((br * (np.abs(dmu) + np.abs(dlam))).max())


def admissible_cutoff(delta: float, gap: float = 8.0, kind: str = "ratio", check: bool = True) -> AdmissibleCutoff:
    if not 0 < delta < 0.5:
        raise CutoffError("delta must lie in (0, 1/2)")
    chi = AdmissibleCutoff(delta, gap, kind)
    if check:
        chi.verify()
    return chi


def _trim_x(a: Symbol) -> Symbol:
    mass = np.abs(a.data).max(axis=0) if a.data.size else np.zeros(0)
    nz = np.nonzero(mass > 0)[0]
    if not len(nz):
        return Symbol(a.two_xi, 0, a.data[:, :1] * 0)
    top = int(packed_spins(a.two_x)[nz.max()])
    return Symbol(a.two_xi, top, a.data[:, :packed_size(top)])


def regularize(a: Symbol, chi: AdmissibleCutoff) -> Symbol:
    """``a^chi(x, xi) = chi(|grad_x|, |xi|) a(x, xi)``."""
    eta = size(packed_spins(a.two_x))
    lam = size(packed_spins(a.two_xi))
    weights = chi(eta[None, :], lam[:, None])
    weights = np.where(np.abs(weights) < 1e-15, 0.0, weights)
    return _trim_x(Symbol(a.two_xi, a.two_x, a.data * weights))


@dataclass
class SpectralConditionReport:
    passed: bool
    offending_mass: float
    offending: list         # (two_eta, two_xi, relative mass)
    measured_parameter: float  # smallest delta' with the condition satisfied


def spectral_condition_check(a: Symbol, delta: float, tol: float = 1e-12,
                             support_tol: float = 1e-24) -> SpectralConditionReport:
    """Scan ``a^(eta, xi)`` for mass at ``|eta| >= delta <xi>``.

    Passes iff the relative offending mass is at most ``tol``.  The measured
    parameter is the largest ``|eta| / <xi>`` over cells whose relative mass
    exceeds ``support_tol`` (just above roundoff), so it is stable under
    operations that rescale the total mass.
    """
    mass = a.x_mass()                                        # (xi entries, eta spins)
    spins_xi = packed_spins(a.two_xi)
    per = np.zeros((a.two_x + 1, a.two_xi + 1))
    for tj in range(a.two_xi + 1):
        per[:, tj] = mass[spins_xi == tj].sum(axis=0)
    total = per.sum()
    rel = per / total if total > 0 else per
    eta = size(np.arange(a.two_x + 1))[:, None]
    br = bracket(np.arange(a.two_xi + 1))[None, :]
    bad = eta >= delta * br
    off = [(int(e), int(x), float(rel[e, x])) for e, x in zip(*np.nonzero(bad & (rel > tol)))]
    offending = float(rel[bad].sum())
    present = rel > support_tol
    measured = float((eta / br)[present].max()) if np.any(present & (eta > 0)) else 0.0
    return SpectralConditionReport(offending <= tol, offending, off, measured)


# ---------------------------------------------------------------- calculus

def compose_sharp(a: Symbol, b: Symbol, r: float, T: TaylorOperators | None = None) -> Symbol:
    """``a #_r b = sum_{|alpha| <= r} (D^alpha a) (X^(alpha) b)``."""
    T = T or taylor_operators(None, int(np.floor(r)) + 1)
    if T.order <= np.floor(r):
        raise ValueError("Taylor operators of higher order are required")
    out = None
    for alpha in T.indices:
        if sum(alpha) > r:
            continue
        if sum(alpha) and b.is_x_independent():
            continue
        term = difference_multi(a, alpha).matmul(T.apply_symbol(alpha, b))
        out = term if out is None else out + term
    return out


def adjoint_symbol(a: Symbol, r: float, T: TaylorOperators | None = None) -> Symbol:
    """``sum_{|alpha| <= r} D^alpha X^(alpha) a^*``."""
    T = T or taylor_operators(None, int(np.floor(r)) + 1)
    astar = a.adjoint()
    out = None
    for alpha in T.indices:
        if sum(alpha) > r:
            continue
        if sum(alpha) and a.is_x_independent():
            continue
        term = difference_multi(T.apply_symbol(alpha, astar), alpha)
        out = term if out is None else out + term
    return out


# ---------------------------------------------------------------- operator matrices

def plancherel_scale(two_b: int, s: float) -> np.ndarray:
    """Per-coefficient factor sqrt(d) <xi>^s mapping coefficients to H^s-isometric coordinates."""
    return np.sqrt(plancherel_weights(two_b, s))


@dataclass
class OperatorMatrix:
    """Linear map between packed spectra; ``raw`` acts on plain coefficients."""

    two_in: int
    two_out: int
    raw: np.ndarray
    s_in: float = 0.0
    s_out: float = 0.0
    truncated_mass: float = 0.0

    @property
    def entries(self) -> np.ndarray:
        """Matrix in H^{s_in} -> H^{s_out} isometric coordinates (unit columns for the input basis)."""
        return (plancherel_scale(self.two_out, self.s_out)[:, None] * self.raw
                / plancherel_scale(self.two_in, self.s_in)[None, :])

    def with_weights(self, s_in: float, s_out: float) -> "OperatorMatrix":
        return OperatorMatrix(self.two_in, self.two_out, self.raw, s_in, s_out, self.truncated_mass)

    def resized(self, two_in: int | None = None, two_out: int | None = None) -> "OperatorMatrix":
        ti = self.two_in if two_in is None else two_in
        to = self.two_out if two_out is None else two_out
        R = np.zeros((packed_size(to), packed_size(ti)), dtype=complex)
        r = min(packed_size(to), packed_size(self.two_out))
        c = min(packed_size(ti), packed_size(self.two_in))
        R[:r, :c] = self.raw[:r, :c]
        lost = 0.0
        if to < self.two_out:
            w = plancherel_weights(self.two_out)[:, None]
            tot = float((w * np.abs(self.raw[:, :c]) ** 2).sum())
            lost = float((w[r:] * np.abs(self.raw[r:, :c]) ** 2).sum()) / tot if tot else 0.0
        return OperatorMatrix(ti, to, R, self.s_in, self.s_out, max(lost, self.truncated_mass))

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        left = self.resized(two_in=other.two_out)
        return OperatorMatrix(other.two_in, left.two_out, left.raw @ other.raw, other.s_in, self.s_out,
                              max(self.truncated_mass, other.truncated_mass))

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        ti = max(self.two_in, other.two_in)
        to = max(self.two_out, other.two_out)
        a, b = self.resized(ti, to), other.resized(ti, to)
        return OperatorMatrix(ti, to, a.raw - b.raw, self.s_in, self.s_out,
                              max(a.truncated_mass, b.truncated_mass))

    def adjoint(self) -> "OperatorMatrix":
        """L^2 adjoint, i.e. conjugate transpose in Plancherel coordinates."""
        po = plancherel_scale(self.two_out, 0.0)
        pi = plancherel_scale(self.two_in, 0.0)
        A = po[:, None] * self.raw / pi[None, :]
        raw = A.conj().T * po[None, :] / pi[:, None]
        return OperatorMatrix(self.two_out, self.two_in, raw, self.s_out, self.s_in)

    def top_octave(self) -> "OperatorMatrix":
        """Restriction to inputs with two_in / 2 < 2j <= two_in."""
        keep = packed_spins(self.two_in) > self.two_in // 2
        return OperatorMatrix(self.two_in, self.two_out, self.raw * keep[None, :], self.s_in, self.s_out,
                              self.truncated_mass)

    def apply(self, f: SpectralFunction) -> SpectralFunction:
        c = resize_packed(f.coeffs, f.two_b, self.two_in)
        return SpectralFunction(self.two_out, self.raw @ c)

    def norm(self) -> float:
        return op_norm(self)


def op_norm(M: OperatorMatrix) -> float:
    """Largest singular value of the weighted matrix (dense Gram eigenvalue)."""
    A = M.entries
    if A.size == 0 or not np.any(A):
        return 0.0
    if A.shape[0] < A.shape[1]:
        A = A.conj().T
    G = A.conj().T @ A
    top = linalg.eigh(G, eigvals_only=True, subset_by_index=[G.shape[0] - 1, G.shape[0] - 1])[0]
    return float(np.sqrt(max(top, 0.0)))


def symbol_matrix(a: Symbol, two_in: int, s_in: float = 0.0, s_out: float = 0.0) -> OperatorMatrix:
    """Matrix of Op(a) on spins up to ``two_in`` (exact output band ``two_in + a.two_x``)."""
    if two_in > a.two_xi:
        raise ValueError("input band exceeds the symbol's xi-band")
    two_out = two_in + a.two_x
    raw = np.zeros((packed_size(two_out), packed_size(two_in)), dtype=complex)
    o_in = _block_slice
    if a.is_x_independent():
        for tj in range(two_in + 1):
            d = tj + 1
            sl = o_in(two_in, tj)
            raw[o_in(two_out, tj), sl] = np.kron(a.block(tj)[..., 0], np.eye(d))
        return OperatorMatrix(two_in, two_out, raw, s_in, s_out)
    for tj in range(two_in + 1):
        d = tj + 1
        cols = quantize_columns(a, two_in, tj)                    # (p, q, out)
        nout = cols.shape[-1]
        raw[:nout, o_in(two_in, tj)] = cols.reshape(d * d, nout).T
    return OperatorMatrix(two_in, two_out, raw, s_in, s_out)


def operator_matrix(op, two_in: int, two_out: int, s_in: float = 0.0, s_out: float = 0.0,
                    tol: float = 1e-9) -> OperatorMatrix:
    """Matrix of a black-box operator by applying it to every basis spectrum."""
    n = packed_size(two_in)
    raw = np.zeros((packed_size(two_out), n), dtype=complex)
    lost = 0.0
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        g = op(SpectralFunction(two_in, e))
        c = g.coeffs
        if g.two_b > two_out:
            w = plancherel_weights(g.two_b)
            tot = float((w * np.abs(c) ** 2).sum())
            if tot > 0:
                lost = max(lost, float((w[packed_size(two_out):] * np.abs(c[packed_size(two_out):]) ** 2).sum()) / tot)
        raw[:, k] = resize_packed(c, g.two_b, two_out)
    return OperatorMatrix(two_in, two_out, raw, s_in, s_out, lost if lost > tol else 0.0)


def multiplier_matrix(values_per_spin, two_b: int) -> OperatorMatrix:
    vals = np.asarray(values_per_spin)[packed_spins(two_b)]
    return OperatorMatrix(two_b, two_b, np.diag(vals.astype(complex)))


# ---------------------------------------------------------------- probes

@dataclass
class ParadiffSettings:
    delta: float = 1.0 / 16
    gap: float = 8.0
    r: float = 1.0
    bands: tuple = (8, 16)        # degrees 2j of the input band
    s_values: tuple = (-2.0, 0.0, 2.0)
    seed: int = 0
    cutoff_kind: str = "ratio"
    ratio_bound: float = 2.0
    x_band: int = 8               # x-band (2j) of the coefficient witnesses in the test family


PARADIFF = ParadiffSettings()

CSV_COLUMNS = ("probe", "band", "s", "m", "m_prime", "r", "delta", "gap", "measured_norm", "pass_bound", "pass")


@dataclass
class ProbeRow:
    probe: str
    band: int
    s: float
    m: float
    m_prime: float
    r: float
    delta: float
    gap: float
    measured_norm: float
    pass_bound: float | None
    passed: bool | None

    def record(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        rec = r.record()
        rec["measured_norm"] = f"{rec['measured_norm']:.12e}"
        w.writerow(rec)
    return buf.getvalue()


def _ratio_rows(name, norms: dict, cfg, s, m=0.0, mp=0.0, bound=None, zero_tol=1e-11):
    """Rows for a 'bounded across doubling' probe: pass iff max/min over bands <= bound."""
    bound = cfg.ratio_bound if bound is None else bound
    vals = np.array([norms[b] for b in cfg.bands])
    if vals.max() <= zero_tol:
        ok = True
    else:
        ok = bool(vals.min() > 0 and vals.max() / vals.min() <= bound)
    return [ProbeRow(name, b, s, m, mp, cfg.r, cfg.delta, cfg.gap, float(norms[b]), bound, ok)
            for b in cfg.bands]


def _contrast_rows(name, norms: dict, cfg, s, m=0.0, mp=0.0, zero_tol=1e-11):
    """Rows for a 'shrinks like band^{-r}' column: fitted exponent within fit_tol of -r.

    The norms are taken on the top input octave, where the band sets the frequency scale.
    """
    b = np.array(cfg.bands, dtype=float)
    vals = np.array([norms[k] for k in cfg.bands])
    if vals.max() <= zero_tol:
        ok, slope = True, -np.inf
    elif vals.min() <= 0:
        ok, slope = False, np.nan
    else:
        slope = float(np.polyfit(np.log(b), np.log(vals), 1)[0])
        ok = abs(slope + cfg.r) <= SETTINGS.fit_tol
    return [ProbeRow(name, k, s, m, mp, cfg.r, cfg.delta, cfg.gap, float(norms[k]), -cfg.r, bool(ok))
            for k in cfg.bands]


def _rng(cfg, salt: int):
    return np.random.default_rng([cfg.seed, salt])


def paraproduct_probe(cfg: ParadiffSettings | None = None) -> list[ProbeRow]:
    """||T_a||_{H^s -> H^s} / |a|_inf for a C^1_* witness a, across band doubling."""
    cfg = cfg or PARADIFF
    norms = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        a = zygmund_witness(1.0, band, _rng(cfg, 1))
        sym = paraproduct_symbol(a, band, cfg.gap)
        M = symbol_matrix(sym, band)
        amax = sup_norm(a)
        for s in cfg.s_values:
            norms[s][band] = op_norm(M.with_weights(s, s)) / amax
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("paraproduct", norms[s], cfg, s)
    return rows


def remainder_probe(cfg: ParadiffSettings | None = None, r_witness: float = 1.0) -> list[ProbeRow]:
    """||R(a, .)||_{H^{s-r} -> H^s} for a C^r_* witness a, across band doubling."""
    cfg = cfg or PARADIFF
    norms = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        a = zygmund_witness(r_witness, band, _rng(cfg, 2))
        M = symbol_matrix(remainder_symbol(a, band, cfg.gap), band)
        for s in cfg.s_values:
            norms[s][band] = op_norm(M.with_weights(s - r_witness, s))
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("remainder_smoothing", norms[s], cfg, s, m=-r_witness)
    return rows


# test-symbol family: a = c(x) I in A^0_r, b = sum_i c_i(x) sigma_{X_i} in A^1_r

def order0_symbol(band: int, cfg, salt: int = 3, two_xi: int | None = None) -> Symbol:
    c = zygmund_witness(cfg.r, cfg.x_band, _rng(cfg, salt))
    return Symbol.identity(band if two_xi is None else two_xi).times_function(c)


def order1_symbol(band: int, cfg, salt: int = 4, two_xi: int | None = None) -> Symbol:
    txi = band if two_xi is None else two_xi
    out = None
    for i, X in enumerate(lie_basis()):
        c = zygmund_witness(cfg.r, cfg.x_band, _rng(cfg, salt + 10 * i))
        term = Symbol.vector_field(X, txi).times_function(c)
        out = term if out is None else out + term
    return out


def _cutoff(cfg, delta=None):
    return admissible_cutoff(cfg.delta if delta is None else delta, cfg.gap, cfg.cutoff_kind)


def para_matrix(a: Symbol, band: int, chi: AdmissibleCutoff) -> OperatorMatrix:
    """Matrix of T_a = Op(a^chi) on spins up to ``band``."""
    return symbol_matrix(regularize(a, chi), band)


def composition_probe(cfg: ParadiffSettings | None = None) -> list[ProbeRow]:
    """T_a T_b - T_{a#b}: H^{s+m+m'-r} -> H^s bounded, plus the contrast H^{s+m+m'} -> H^s."""
    cfg = cfg or PARADIFF
    chi = _cutoff(cfg)
    T = taylor_operators(None, int(np.floor(cfg.r)) + 1)
    m, mp = 0.0, 1.0
    bounded = {s: {} for s in cfg.s_values}
    contrast = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        head = band + 2 * int(np.ceil(cfg.r)) + 2
        b = order1_symbol(band, cfg, two_xi=head)
        Tb = para_matrix(b, band, chi)
        a = order0_symbol(band, cfg, two_xi=max(head, Tb.two_out))
        Ta = para_matrix(a, Tb.two_out, chi)
        Tab = para_matrix(compose_sharp(a.with_bands(two_xi=head), b, cfg.r, T), band, chi)
        D = (Ta @ Tb) - Tab
        for s in cfg.s_values:
            bounded[s][band] = op_norm(D.with_weights(s + m + mp - cfg.r, s))
            contrast[s][band] = op_norm(D.top_octave().with_weights(s + m + mp, s))
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("compose", bounded[s], cfg, s, m, mp)
        rows += _contrast_rows("compose_contrast", contrast[s], cfg, s, m, mp)
    return rows


def commutator_probe(cfg: ParadiffSettings | None = None) -> list[ProbeRow]:
    """[T_a, T_b] as H^{s+m+m'-1} -> H^s, plus the contrast H^{s+m+m'} -> H^s."""
    cfg = cfg or PARADIFF
    chi = _cutoff(cfg)
    m, mp = 1.0, 1.0
    bounded = {s: {} for s in cfg.s_values}
    contrast = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        a = order1_symbol(band, cfg, salt=5)
        b = order1_symbol(band, cfg, salt=6)
        Ta = para_matrix(a, band, chi)
        Tb = para_matrix(b, band, chi)
        D = (Ta @ Tb) - (Tb @ Ta)
        for s in cfg.s_values:
            bounded[s][band] = op_norm(D.with_weights(s + m + mp - 1, s))
            contrast[s][band] = op_norm(D.top_octave().with_weights(s + m + mp, s))
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("commutator", bounded[s], cfg, s, m, mp)
        rows += _contrast_rows("commutator_contrast", contrast[s], cfg, s, m, mp)
    return rows


def adjoint_probe(cfg: ParadiffSettings | None = None) -> list[ProbeRow]:
    """T_a^* - T_{a^bullet} as H^{s+m-r} -> H^s, plus the contrast H^{s+m} -> H^s."""
    cfg = cfg or PARADIFF
    chi = _cutoff(cfg)
    T = taylor_operators(None, int(np.floor(cfg.r)) + 1)
    m = 1.0
    bounded = {s: {} for s in cfg.s_values}
    contrast = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        head = band + 2 * int(np.ceil(cfg.r)) + 2
        a = order1_symbol(band, cfg, salt=7, two_xi=head) * 1j
        tx = regularize(a, chi).two_x
        # T_a^* on spins <= band sees T_a on spins <= band + tx
        wide = a if band + tx <= head else order1_symbol(band, cfg, salt=7, two_xi=band + tx) * 1j
        Ta = para_matrix(wide, band + tx, chi)
        Tstar = Ta.adjoint().resized(two_in=band)
        Tbullet = para_matrix(adjoint_symbol(a, cfg.r, T), band, chi)
        D = Tstar - Tbullet
        for s in cfg.s_values:
            bounded[s][band] = op_norm(D.with_weights(s + m - cfg.r, s))
            contrast[s][band] = op_norm(D.top_octave().with_weights(s + m, s))
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("adjoint", bounded[s], cfg, s, m)
        rows += _contrast_rows("adjoint_contrast", contrast[s], cfg, s, m)
    return rows


def cutoff_freedom_probe(cfg: ParadiffSettings | None = None, deltas=(1.0 / 16, 1.0 / 8)) -> list[ProbeRow]:
    """T^{chi1}_a - T^{chi2}_a as H^{s+m-r} -> H^s, plus the contrast H^{s+m} -> H^s."""
    cfg = cfg or PARADIFF
    chi1, chi2 = _cutoff(cfg, deltas[0]), _cutoff(cfg, deltas[1])
    m = 1.0
    bounded = {s: {} for s in cfg.s_values}
    contrast = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        a = order1_symbol(band, cfg, salt=8)
        D = para_matrix(a, band, chi1) - para_matrix(a, band, chi2)
        for s in cfg.s_values:
            bounded[s][band] = op_norm(D.with_weights(s + m - cfg.r, s))
            contrast[s][band] = op_norm(D.top_octave().with_weights(s + m, s))
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("cutoff_freedom", bounded[s], cfg, s, m)
        rows += _contrast_rows("cutoff_freedom_contrast", contrast[s], cfg, s, m)
    return rows


def regularization_op_probe(cfg: ParadiffSettings | None = None) -> list[ProbeRow]:
    """Op(a - a^chi) as H^{s+m-r} -> H^s, plus the contrast H^{s+m} -> H^s."""
    cfg = cfg or PARADIFF
    chi = _cutoff(cfg)
    m = 1.0
    bounded = {s: {} for s in cfg.s_values}
    contrast = {s: {} for s in cfg.s_values}
    for band in cfg.bands:
        a = order1_symbol(band, cfg, salt=12)
        D = symbol_matrix(a - regularize(a, chi), band)
        for s in cfg.s_values:
            bounded[s][band] = op_norm(D.with_weights(s + m - cfg.r, s))
            contrast[s][band] = op_norm(D.top_octave().with_weights(s + m, s))
    rows = []
    for s in cfg.s_values:
        rows += _ratio_rows("a_minus_achi", bounded[s], cfg, s, m)
        rows += _contrast_rows("a_minus_achi_contrast", contrast[s], cfg, s, m)
    return rows


def regularization_probe(cfg: ParadiffSettings | None = None, x_band: int = 4) -> list:
    """Decay fits of sup_x ||D^beta (a - a^chi)|| for a = c(x) <xi> I with c a C^r_* witness.

    Claimed order ``m - r - |beta|`` (upper bound), m = 1.
    """
    from .symbols import difference_norms, fit_band, _report
    cfg = cfg or PARADIFF
    chi = _cutoff(cfg)
    tb = fit_band()
    c = zygmund_witness(cfg.r, x_band, _rng(cfg, 9))
    a = Symbol.multiplier(bracket(np.arange(tb + 1)), tb).times_function(c)
    diff = a - regularize(a, chi)
    reps = []
    for order in range(3):
        norms = difference_norms(diff, order)
        reps.append(_report(f"a-a^chi |beta|={order}", norms, 1.0 - cfg.r - order, upper_only=True))
    return reps


def stein_probe(cfg: ParadiffSettings | None = None, s: float = -1.0, sigma_delta: float = 1.0 / 8) -> list[ProbeRow]:
    """Op(a) on H^s for a(x, xi) = e_{eta(xi)}(x) I with x-frequency tied to xi.

    ``unconstrained``: |eta(xi)| close to <xi> (no spectral condition, reported only);
    ``sigma``: |eta(xi)| < sigma_delta <xi> (spectral condition, must stay bounded).
    """
    cfg = cfg or PARADIFF
    rows = []
    norms = {"stein_unconstrained": {}, "stein_sigma": {}}
    for band in cfg.bands:
        rng = _rng(cfg, 11)
        for name, rho in (("stein_unconstrained", 1.0), ("stein_sigma", sigma_delta)):
            sym = _stein_symbol(band, rho, rng, strict=(name == "stein_sigma"))
            M = symbol_matrix(sym, band)
            norms[name][band] = op_norm(M.with_weights(s, s))
    for b in cfg.bands:
        rows.append(ProbeRow("stein_unconstrained", b, s, 0.0, 0.0, cfg.r, 1.0, cfg.gap,
                             norms["stein_unconstrained"][b], None, None))
    sub = ParadiffSettings(**{**asdict(cfg), "delta": sigma_delta})
    rows += _ratio_rows("stein_sigma", norms["stein_sigma"], sub, s)
    return rows


def _stein_symbol(band: int, rho: float, rng, strict: bool) -> Symbol:
    """a(x, xi) = g_{eta(xi)}(x) I with g_eta a unit-sup function of spin eta."""
    from .fourier import random_spectral
    tjs = np.arange(band + 1)
    br = bracket(tjs)
    lam = size(tjs)
    targets = []
    for tj in tjs:
        ok = lam < rho * br[tj] if strict else lam <= rho * br[tj]
        targets.append(int(tjs[ok].max()))
    tx = max(targets)
    data = np.zeros((packed_size(band), packed_size(tx)), dtype=complex)
    cache = {}
    for tj, te in zip(tjs, targets):
        if te not in cache:
            g = random_spectral(te, rng, real=True)
            c = np.where(packed_spins(te) == te, g.coeffs, 0.0) if te > 0 else g.coeffs
            f = SpectralFunction(te, c)
            cache[te] = resize_packed(f.coeffs, te, tx) / max(sup_norm(f), 1e-300)
        d = tj + 1
        blk = np.zeros((d, d, packed_size(tx)), dtype=complex)
        blk[np.arange(d), np.arange(d)] = cache[te]
        data[_block_slice(band, tj)] = blk.reshape(d * d, -1)
    return Symbol(band, tx, data)


def delta_sweep(cfg: ParadiffSettings | None = None, deltas=(1 / 32, 1 / 16, 1 / 8, 1 / 4, 0.45)) -> list[ProbeRow]:
    """Composition probe at several delta values (diagnostic for the onset of boundedness)."""
    cfg = cfg or PARADIFF
    rows = []
    for d in deltas:
        sub = ParadiffSettings(**{**asdict(cfg), "delta": d})
        rows += composition_probe(sub)
    return rows


def difference_scale(two_xi: int) -> float:
    """max_j <xi_{j+1/2}> / <xi_j>: x-spectra of D_q a at xi come from a at the neighbouring spin."""
    tj = np.arange(two_xi)
    return float((bracket(tj + 1) / bracket(tj)).max())


def spectral_condition_probe(cfg: ParadiffSettings | None = None, deltas=None) -> list[dict]:
    """Regularized symbols, one difference and one derivative against the spectral condition."""
    from .symbols import difference_op, TUPLE_KEYS
    cfg = cfg or PARADIFF
    deltas = (cfg.delta, 0.45) if deltas is None else deltas
    band = max(cfg.bands)
    recs = []
    a = order1_symbol(band, cfg, salt=13)
    for delta in deltas:
        chi = admissible_cutoff(delta, cfg.gap, cfg.cutoff_kind)
        ar = regularize(a, chi)
        base = spectral_condition_check(ar, delta)
        c = difference_scale(ar.two_xi)
        # allowed parameters: delta itself, and the measured parameter of a^chi scaled by the
        # neighbour constant (difference) or unchanged (derivative); both checked by offending mass
        slack = lambda p: p * (1.0 + 1e-9) + 1e-12
        cases = [("regularized", ar, delta)]
        cases += [(f"difference{k}", difference_op(k, ar), c * delta) for k in TUPLE_KEYS]
        cases += [(f"difference{k}_measured", difference_op(k, ar), slack(c * base.measured_parameter))
                  for k in TUPLE_KEYS]
        cases += [(f"derivative{i}", ar.x_derivative(X), slack(base.measured_parameter))
                  for i, X in enumerate(lie_basis())]
        for name, sym, allowed in cases:
            rep = spectral_condition_check(sym, allowed)
            recs.append({"probe": "spectral_condition", "case": name, "band": band, "delta": delta,
                         "allowed_parameter": allowed, "offending_mass": rep.offending_mass,
                         "measured_parameter": rep.measured_parameter, "pass": rep.passed})
    return recs


def opnorm_checks(cfg: ParadiffSettings | None = None, m_values=(1.0, 2.0)) -> list[ProbeRow]:
    """Identity has norm 1 on every H^s; |grad|^m maps H^{s+m} -> H^s with norm <= 1."""
    cfg = cfg or PARADIFF
    band = max(cfg.bands)
    rows = []
    ident = multiplier_matrix(np.ones(band + 1), band)
    for s in cfg.s_values:
        n = op_norm(ident.with_weights(s, s))
        rows.append(ProbeRow("opnorm_identity", band, s, 0.0, 0.0, cfg.r, cfg.delta, cfg.gap, n, 1.0,
                             bool(abs(n - 1.0) <= 1e-12)))
        for m in m_values:
            M = multiplier_matrix(size(np.arange(band + 1)) ** m, band).with_weights(s + m, s)
            n = op_norm(M)
            rows.append(ProbeRow("opnorm_grad_power", band, s, m, 0.0, cfg.r, cfg.delta, cfg.gap, n, 1.0,
                                 bool(n <= 1.0 + 1e-12)))
    return rows
