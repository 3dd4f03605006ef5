"""Symbols a(x, xi), quantization, difference operators and Taylor operators.

A :class:`Symbol` stores, for every packed entry ``(xi, p, q)``, the packed
x-spectrum of the function ``x -> a(x, xi)_{pq}``.  So ``data`` has shape
``(packed_size(two_xi), packed_size(two_x))`` and the partial Fourier
transform ``a^(eta, xi)`` is a slice of it.  Grid values are produced on
demand.

Quantization follows ``Op(a) f(x) = sum_xi d_xi Tr(a(x, xi) f^(xi) xi(x))``.
Difference operators act in the xi variable through the kernel
``k_x(z) = sum_xi d_xi Tr(a(x, xi) xi(z))``: ``D_q a`` is the spectrum of
``q k_x``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .config import SETTINGS
from .fourier import (SpectralFunction, TruncationError, block_view, conj_coeffs, derivative_coeffs,
                      evaluation_matrix, forward_values, inverse_values, offsets, packed_size,
                      packed_spins, plancherel_weights, resize_packed, truncate)
from .group import QuadratureGrid, grid_for_total, two
from .irreps import basis_drep, bracket, drep2, lie_basis, little_d, size, weights


class SymbolError(ValueError):
    pass


class TaylorError(np.linalg.LinAlgError):
    pass


def _block_slice(two_b: int, two_j: int) -> slice:
    o = offsets(two_b)
    return slice(o[two_j], o[two_j + 1])


@dataclass(frozen=True)
class Symbol:
    """Matrix-valued symbol band-limited in x and truncated in xi."""

    two_xi: int
    two_x: int
    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=complex)
        shape = (packed_size(self.two_xi), packed_size(self.two_x))
        if d.shape != shape:
            raise SymbolError(f"symbol data must have shape {shape}, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    # ------------------------------------------------------------ constructors
    @classmethod
    def zeros(cls, two_xi: int, two_x: int = 0) -> "Symbol":
        return cls(two_xi, two_x, np.zeros((packed_size(two_xi), packed_size(two_x))))

    @classmethod
    def from_xi_blocks(cls, fn, two_xi: int) -> "Symbol":
        """x-independent symbol with ``a(xi) = fn(two_j)``."""
        col = np.zeros(packed_size(two_xi), dtype=complex)
        for tj in range(two_xi + 1):
            col[_block_slice(two_xi, tj)] = np.broadcast_to(fn(tj), (tj + 1, tj + 1)).ravel()
        return cls(two_xi, 0, col[:, None])

    @classmethod
    def identity(cls, two_xi: int) -> "Symbol":
        return cls.from_xi_blocks(lambda tj: np.eye(tj + 1), two_xi)

    @classmethod
    def multiplier(cls, values_per_spin, two_xi: int) -> "Symbol":
        """``h(xi) I`` with ``values_per_spin[two_j]`` or a callable of two_j."""
        vals = values_per_spin
        if callable(vals):
            vals = [vals(tj) for tj in range(two_xi + 1)]
        return cls.from_xi_blocks(lambda tj: vals[tj] * np.eye(tj + 1), two_xi)

    @classmethod
    def vector_field(cls, X: np.ndarray, two_xi: int) -> "Symbol":
        """Symbol ``d xi(X)`` of the left-invariant vector field X."""
        return cls.from_xi_blocks(lambda tj: drep2(tj, X), two_xi)

    @classmethod
    def from_scalar(cls, c: SpectralFunction, values_per_spin, two_xi: int) -> "Symbol":
        """``c(x) h(xi) I``."""
        base = cls.multiplier(values_per_spin, two_xi)
        return base.times_function(c)

    # ------------------------------------------------------------ access
    @property
    def x_band(self) -> Fraction:
        return Fraction(self.two_x, 2)

    @property
    def bandlimit_xi(self) -> Fraction:
        return Fraction(self.two_xi, 2)

    def block(self, two_j: int) -> np.ndarray:
        """x-spectra of ``a(., xi_j)``, shape ``(d, d, nx)``."""
        d = two_j + 1
        return self.data[_block_slice(self.two_xi, two_j)].reshape(d, d, -1)

    def partial_fourier(self, two_eta: int, two_j: int) -> np.ndarray:
        """``a^(eta, xi)`` as an array ``[p, q, r, s]``: entry (p, q) of the xi-matrix, (r, s) of eta."""
        if two_eta > self.two_x:
            de = two_eta + 1
            return np.zeros((two_j + 1, two_j + 1, de, de), dtype=complex)
        blk = self.block(two_j)[..., _block_slice(self.two_x, two_eta)]
        return blk.reshape(blk.shape[:2] + (two_eta + 1, two_eta + 1))

    def x_mass(self) -> np.ndarray:
        """Plancherel mass in x, per (xi entry, eta spin)."""
        w = plancherel_weights(self.two_x) * np.abs(self.data) ** 2
        out = np.zeros((self.data.shape[0], self.two_x + 1))
        spins = packed_spins(self.two_x)
        for te in range(self.two_x + 1):
            out[:, te] = w[:, spins == te].sum(axis=1)
        return out

    def values_at(self, u: np.ndarray, two_j: int) -> np.ndarray:
        """``a(u_k, xi_j)`` for an array of group matrices, shape ``(n, d, d)``."""
        E = evaluation_matrix(self.two_x, u)
        blk = self.block(two_j)
        return np.einsum("pqk,nk->npq", blk, E)

    def grid_values(self, grid: QuadratureGrid, two_j: int) -> np.ndarray:
        """``a(x, xi_j)`` on the grid, shape ``(d, d) + grid.shape``."""
        return inverse_values(grid, self.block(two_j), self.two_x)

    def is_x_independent(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.data[:, 1:]).max(initial=0.0) <= tol)

    # ------------------------------------------------------------ algebra
    def with_bands(self, two_xi: int | None = None, two_x: int | None = None,
                   allow_truncation: bool = False) -> "Symbol":
        txi = self.two_xi if two_xi is None else two_xi
        tx = self.two_x if two_x is None else two_x
        d = self.data
        if tx != self.two_x:
            d, _ = truncate(d, self.two_x, tx, allow=allow_truncation)
        if txi != self.two_xi:
            d = resize_packed(d.T, self.two_xi, txi).T
        return Symbol(txi, tx, d)

    def _aligned(self, other: "Symbol"):
        txi = min(self.two_xi, other.two_xi)
        tx = max(self.two_x, other.two_x)
        return self.with_bands(txi, tx), other.with_bands(txi, tx)

    def __add__(self, other: "Symbol") -> "Symbol":
        a, b = self._aligned(other)
        return Symbol(a.two_xi, a.two_x, a.data + b.data)

    def __sub__(self, other: "Symbol") -> "Symbol":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "Symbol":
        return Symbol(self.two_xi, self.two_x, scalar * self.data)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def adjoint(self) -> "Symbol":
        """Entrywise adjoint ``a(x, xi)^*``."""
        out = np.empty_like(self.data)
        for tj in range(self.two_xi + 1):
            d = tj + 1
            sl = _block_slice(self.two_xi, tj)
            blk = self.data[sl].reshape(d, d, -1).transpose(1, 0, 2)
            out[sl] = conj_coeffs(blk, self.two_x).reshape(d * d, -1)
        return Symbol(self.two_xi, self.two_x, out)

    def x_derivative(self, X: np.ndarray) -> "Symbol":
        return Symbol(self.two_xi, self.two_x, derivative_coeffs(self.data, self.two_x, X))

    def times_function(self, c: SpectralFunction) -> "Symbol":
        """Pointwise product ``c(x) a(x, xi)`` (exact, x-band grows)."""
        tx = self.two_x + c.two_b
        grid = grid_for_total(2 * tx)
        out = np.empty((self.data.shape[0], packed_size(tx)), dtype=complex)
        cv = inverse_values(grid, c.coeffs, c.two_b)
        for sl in _chunks(self.data.shape[0]):
            av = inverse_values(grid, self.data[sl], self.two_x)
            out[sl] = forward_values(grid, av * cv, tx)
        return Symbol(self.two_xi, tx, out)

    def matmul(self, other: "Symbol") -> "Symbol":
        """Pointwise matrix product ``a(x, xi) b(x, xi)``."""
        a, b = self, other
        txi = min(a.two_xi, b.two_xi)
        if a.is_x_independent() and b.is_x_independent():
            col = np.zeros(packed_size(txi), dtype=complex)
            for tj in range(txi + 1):
                col[_block_slice(txi, tj)] = (a.block(tj)[..., 0] @ b.block(tj)[..., 0]).ravel()
            return Symbol(txi, 0, col[:, None])
        tx = a.two_x + b.two_x
        grid = grid_for_total(2 * tx)
        out = np.zeros((packed_size(txi), packed_size(tx)), dtype=complex)
        for tj in range(txi + 1):
            av = a.grid_values(grid, tj)
            bv = b.grid_values(grid, tj)
            prod = np.einsum("pr...,rq...->pq...", av, bv)
            out[_block_slice(txi, tj)] = forward_values(grid, prod, tx).reshape((tj + 1) ** 2, -1)
        return Symbol(txi, tx, out)

    def commutator(self, other: "Symbol") -> "Symbol":
        return self.matmul(other) - other.matmul(self)

    # ------------------------------------------------------------ serialization
    def to_records(self) -> dict:
        entries = []
        for tj in range(self.two_xi + 1):
            blk = self.block(tj)
            for p in range(tj + 1):
                for q in range(tj + 1):
                    f = SpectralFunction(self.two_x, blk[p, q])
                    from .fourier import to_records
                    entries.append({"two_j": tj, "p": p, "q": q, "function": to_records(f)})
        return {"two_xi": self.two_xi, "two_x": self.two_x, "entries": entries}

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text: str) -> "Symbol":
        from .fourier import from_records
        rec = json.loads(text)
        txi, tx = int(rec["two_xi"]), int(rec["two_x"])
        data = np.zeros((packed_size(txi), packed_size(tx)), dtype=complex)
        for e in rec["entries"]:
            tj, p, q = int(e["two_j"]), int(e["p"]), int(e["q"])
            data[offsets(txi)[tj] + p * (tj + 1) + q] = resize_packed(
                from_records(e["function"]).coeffs, int(e["function"]["two_b"]), tx)
        return cls(txi, tx, data)


def _chunks(n: int, size: int = 64):
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


# ---------------------------------------------------------------- quantization

def _entry_grid_values(grid: QuadratureGrid, two_j: int, r: int) -> np.ndarray:
    """Values of ``xi_{q r}(x)`` for all q (column r of the Wigner matrix), shape (d,) + grid.shape."""
    m = weights(two_j)
    ea = np.exp(-1j * np.outer(m, grid.alpha))                     # (d, Na)
    dcol = little_d(two_j, grid.beta)[:, :, r].T                    # (d, Nb)
    eg = np.exp(-1j * m[r] * grid.gamma)                            # (Ng,)
    return ea[:, :, None, None] * dcol[:, None, :, None] * eg[None, None, None, :]


def quantize(a: Symbol, f: SpectralFunction, out_band=None, allow_truncation: bool = False) -> SpectralFunction:
    """``Op(a) f``, computed on a grid exact for the product band.

    The exact output band is ``f.bandlimit + a.x_band``; a smaller
    ``out_band`` raises :class:`TruncationError` if mass would be lost.
    """
    tb_f = min(f.two_b, a.two_xi)
    if f.two_b > a.two_xi:
        _, lost = truncate(f.coeffs, f.two_b, a.two_xi, allow=allow_truncation)
    full = tb_f + a.two_x
    grid = grid_for_total(2 * full)
    acc = np.zeros(grid.shape, dtype=complex)
    for tj in range(tb_f + 1):
        fh = f.block2(tj)
        if not np.any(fh):
            continue
        N = np.einsum("prk,rq->pqk", a.block(tj), fh)               # x-spectra of a f^
        for r in range(tj + 1):
            nv = inverse_values(grid, N[r], a.two_x)                # N_{r q}(x) for all q
            acc += (tj + 1) * np.einsum("q...,q...->...", nv, _entry_grid_values(grid, tj, r))
    c = forward_values(grid, acc, full)
    two_out = full if out_band is None else two(out_band)
    c, _ = truncate(c, full, two_out, allow=allow_truncation)
    return SpectralFunction(two_out, c)


def quantize_columns(a: Symbol, two_in: int, two_j: int) -> np.ndarray:
    """Spectra of ``Op(a)`` applied to the entry functions of spin j.

    Returns ``(d, d, packed_size(two_j + two_x))`` indexed ``[p, q]`` for the
    input with ``f^ = E_pq`` (a single coefficient equal to one).  Then
    ``Op(a) f = d (xi(x) a(x, xi))_{qp}``.
    """
    if two_j > a.two_xi:
        raise SymbolError("input spin exceeds the symbol's xi-band")
    tx = a.two_x
    full = two_j + tx
    d = two_j + 1
    grid = grid_for_total(2 * full)
    out = np.empty((d, d, packed_size(full)), dtype=complex)
    av = a.grid_values(grid, two_j)                                 # (r, p) + grid
    xi_cols = np.stack([_entry_grid_values(grid, two_j, r) for r in range(d)], axis=1)  # (q, r) + grid
    for p in range(d):
        g = np.einsum("qr...,r...->q...", xi_cols, av[:, p])
        out[p] = d * forward_values(grid, g, full)
    return out


def symbol_of_operator(A, two_xi: int, two_x: int, tol: float = 1e-9) -> Symbol:
    """Recover ``sigma(x, xi) = xi(x)^* (A xi)(x)`` from a black-box operator.

    ``A`` maps a :class:`SpectralFunction` to a :class:`SpectralFunction`.
    Mass of the recovered symbol beyond the x-band ``two_x`` above ``tol``
    raises :class:`TruncationError`.
    """
    data = np.zeros((packed_size(two_xi), packed_size(two_x)), dtype=complex)
    for tj in range(two_xi + 1):
        d = tj + 1
        images = {}
        for m in range(d):
            for q in range(d):
                images[m, q] = A(SpectralFunction.entry(tj, m, q))
        tb_img = max(g.two_b for g in images.values())
        full = tb_img + tj
        grid = grid_for_total(2 * full)
        img_vals = np.stack([np.stack([inverse_values(grid, images[m, q].coeffs, images[m, q].two_b)
                                       for q in range(d)]) for m in range(d)])   # (m, q) + grid
        for p in range(d):
            conj_col = _entry_grid_values(grid, tj, p).conj()       # conj(xi_{m p}) for all m
            rowvals = np.einsum("m...,mq...->q...", conj_col, img_vals)
            spec = forward_values(grid, rowvals, full)
            if full > two_x:
                spec, lost = truncate(spec, full, two_x, allow=True)
                if lost > tol:
                    raise TruncationError(f"operator symbol exceeds x-band: lost mass {lost:.2e}")
            else:
                spec = resize_packed(spec, full, two_x)
            data[offsets(two_xi)[tj] + p * d: offsets(two_xi)[tj] + (p + 1) * d] = spec
    return Symbol(two_xi, two_x, data)


def kernel_spectra(a: Symbol, u: np.ndarray) -> np.ndarray:
    """Packed z-spectra of ``K(x_k, .)`` at the points ``u``: row k is ``a(x_k, .)``."""
    E = evaluation_matrix(a.two_x, u)                                # (n, nx)
    return E @ a.data.T


def conv_kernel(a: Symbol, grid: QuadratureGrid, x_points: np.ndarray) -> np.ndarray:
    """``K(x, z) = sum_xi d_xi Tr(a(x, xi) xi(z))``, rows x_points, columns the grid nodes."""
    if grid.two_b < a.two_xi:
        raise SymbolError("grid too coarse for the symbol's xi-band")
    spec = kernel_spectra(a, x_points)
    return inverse_values(grid, spec, a.two_xi).reshape(len(spec), -1)


def kernel_integral(a: Symbol, f: SpectralFunction, x_points: np.ndarray) -> np.ndarray:
    """``int f(y) K(x, y^{-1} x) dy`` at the given points (independent of :func:`quantize`)."""
    from .fourier import evaluate
    grid = grid_for_total(a.two_xi + f.two_b)
    ys = grid.matrices
    fy = inverse_values(grid, f.coeffs, f.two_b).ravel()
    spec = kernel_spectra(a, x_points)
    out = []
    for k, x in enumerate(np.asarray(x_points).reshape(-1, 2, 2)):
        z = np.swapaxes(ys.conj(), -1, -2) @ x
        K = evaluate(SpectralFunction(a.two_xi, spec[k]), z)
        out.append(np.sum(grid.weights * fy * K))
    return np.array(out)


# ---------------------------------------------------------------- fundamental tuple

TUPLE_KEYS = ((0, 0), (0, 1), (1, 0), (1, 1))
INDEPENDENT = (0, 1, 2)  # positions in TUPLE_KEYS with independent differentials at e


@dataclass(frozen=True)
class FundamentalTuple:
    """``q_{jk}(x) = tau_{jk}(x) - delta_{jk}`` for the spin-1/2 representation tau."""

    reflected: bool = False

    @property
    def keys(self):
        return TUPLE_KEYS

    def function(self, key) -> SpectralFunction:
        j, k = key
        if self.reflected:
            # q(x^{-1})_{jk} = conj(tau_{kj}(x)) - delta: diagonal entries swap, off-diagonal flip sign
            f = (SpectralFunction.entry(1, 1 - j, 1 - k) if j == k
                 else -1.0 * SpectralFunction.entry(1, j, k))
        else:
            f = SpectralFunction.entry(1, j, k)
        if j == k:
            f = f - SpectralFunction.constant(1.0, 1)
        return f

    def functions(self) -> list[SpectralFunction]:
        return [self.function(k) for k in TUPLE_KEYS]

    def values(self, u: np.ndarray) -> np.ndarray:
        """All four functions at the matrices u, as ``(..., 2, 2)``."""
        u = np.asarray(u)
        if self.reflected:
            u = np.swapaxes(u.conj(), -1, -2)
        return u - np.eye(2)

    def monomial(self, alpha) -> SpectralFunction:
        """``q^alpha``, product over the tuple with exponents alpha (length 4)."""
        from .fourier import multiply
        out = SpectralFunction.constant(1.0, 0)
        for key, n in zip(TUPLE_KEYS, alpha):
            for _ in range(n):
                out = multiply(out, self.function(key))
        return out

    def monomial_values(self, alpha, u: np.ndarray) -> np.ndarray:
        v = self.values(u)
        out = np.ones(v.shape[:-2], dtype=complex)
        for key, n in zip(TUPLE_KEYS, alpha):
            out = out * v[..., key[0], key[1]] ** n
        return out

    @staticmethod
    def structure_constants() -> np.ndarray:
        """c[mu, nu, nu'] = 1 iff q_mu(xy) contains q_nu(x) q_nu'(y)."""
        c = np.zeros((4, 4, 4))
        for a, (i, j) in enumerate(TUPLE_KEYS):
            for b, (i2, k) in enumerate(TUPLE_KEYS):
                for e, (k2, j2) in enumerate(TUPLE_KEYS):
                    if i2 == i and j2 == j and k2 == k:
                        c[a, b, e] = 1.0
        return c


def leibniz_check(q: FundamentalTuple, x: np.ndarray, y: np.ndarray) -> float:
    """max |q(xy) - q(x) - q(y) - q(x) q(y)| over the given pairs of matrices."""
    x = np.asarray(getattr(x, "u", x))
    y = np.asarray(getattr(y, "u", y))
    qx, qy, qxy = q.values(x), q.values(y), q.values(x @ y)
    if q.reflected:
        # the reflected tuple satisfies the mirrored rule q(xy) = q(x) + q(y) + q(y) q(x)
        res = qxy - qx - qy - qy @ qx
    else:
        res = qxy - qx - qy - qx @ qy
    return float(np.abs(res).max())


# ---------------------------------------------------------------- difference operators

def _difference_coeffs(data_t: np.ndarray, two_xi: int, q: SpectralFunction) -> np.ndarray:
    """Apply D_q to stacked xi-spectra (trailing axis); output band two_xi - 1."""
    tb = two_xi + q.two_b
    grid = grid_for_total(2 * tb)
    qv = inverse_values(grid, q.coeffs, q.two_b)
    out = np.empty(data_t.shape[:-1] + (packed_size(two_xi - q.two_b),), dtype=complex)
    for sl in _chunks(data_t.shape[0], 16):
        kv = inverse_values(grid, data_t[sl], two_xi)
        c = forward_values(grid, kv * qv, tb)
        out[sl] = c[..., :packed_size(two_xi - q.two_b)]
    return out


def difference_op(q, a: Symbol) -> Symbol:
    """``D_q a``; the top xi-spin is dropped because it depends on spins above the truncation."""
    if isinstance(q, tuple):
        q = FundamentalTuple().function(q)
    if a.two_xi < q.two_b:
        raise SymbolError("no xi headroom left for a difference")
    out = _difference_coeffs(a.data.T, a.two_xi, q)
    return Symbol(a.two_xi - q.two_b, a.two_x, out.T)


def difference_spectrum(q: SpectralFunction, f: SpectralFunction) -> SpectralFunction:
    """``D_q`` on a plain spectrum (full output band, no top-spin drop)."""
    from .fourier import multiply
    return multiply(q, f)


def difference_multi(a: Symbol, beta, q: FundamentalTuple | None = None) -> Symbol:
    """``D^beta a`` for a length-4 multi-index over the tuple."""
    q = q or FundamentalTuple()
    out = a
    for key, n in zip(TUPLE_KEYS, beta):
        for _ in range(n):
            out = difference_op(q.function(key), out)
    return out


def multi_indices(order: int, n: int = 4):
    """All length-n multi-indices with total degree ``order``."""
    for combo in itertools.combinations_with_replacement(range(n), order):
        alpha = [0] * n
        for c in combo:
            alpha[c] += 1
        yield tuple(alpha)


# ---------------------------------------------------------------- Taylor operators

def normal_monomials(max_order: int):
    """Exponents (a, b, c) of X1^a X2^b X3^c with a + b + c <= max_order."""
    out = []
    for n in range(max_order + 1):
        for a in range(n, -1, -1):
            for b in range(n - a, -1, -1):
                out.append((a, b, n - a - b))
    return out


@lru_cache(maxsize=None)
def _monomial_matrices(two_j: int, max_order: int, kappa: float) -> np.ndarray:
    X = basis_drep(two_j)
    mats = []
    for (a, b, c) in normal_monomials(max_order):
        M = np.eye(two_j + 1, dtype=complex)
        for Xk, n in zip(X, (a, b, c)):
            M = M @ np.linalg.matrix_power(Xk, n)
        mats.append(M)
    return np.array(mats)


def monomial_matrices(two_j: int, max_order: int) -> np.ndarray:
    """``d xi(X1)^a d xi(X2)^b d xi(X3)^c`` for all normal monomials."""
    return _monomial_matrices(two_j, max_order, SETTINGS.metric_scale)


@dataclass(frozen=True)
class TaylorOperators:
    """Operators ``X^(alpha) = sum_gamma c[alpha, gamma] X^gamma`` dual to the reflected tuple.

    ``indices`` lists the multi-indices over the independent tuple entries
    (length 4, last entry 0); any other index maps to the zero operator.
    """

    order: int
    indices: tuple
    monomials: tuple
    coeffs: np.ndarray
    moment: np.ndarray
    _ops: dict = field(default_factory=dict, repr=False, compare=False)

    def matrix(self, alpha, two_j: int) -> np.ndarray:
        """``d xi(X^(alpha))`` on spin j."""
        alpha = tuple(alpha)
        key = (alpha, two_j)
        if key not in self._ops:
            if alpha not in self.indices:
                if sum(alpha) >= self.order:
                    raise KeyError(f"multi-index {alpha} beyond order {self.order}")
                self._ops[key] = np.zeros((two_j + 1, two_j + 1), dtype=complex)
            else:
                row = self.coeffs[self.indices.index(alpha)]
                self._ops[key] = np.tensordot(row, monomial_matrices(two_j, self.order - 1), axes=1)
        return self._ops[key]

    def apply_coeffs(self, alpha, coeffs: np.ndarray, two_b: int) -> np.ndarray:
        out = np.empty(np.shape(coeffs), dtype=complex)
        for tj in range(two_b + 1):
            block_view(out, two_b, tj)[...] = np.einsum(
                "pr,...rq->...pq", self.matrix(alpha, tj), block_view(coeffs, two_b, tj))
        return out

    def apply(self, alpha, f: SpectralFunction) -> SpectralFunction:
        return SpectralFunction(f.two_b, self.apply_coeffs(alpha, f.coeffs, f.two_b))

    def apply_symbol(self, alpha, a: Symbol) -> Symbol:
        """``X^(alpha)`` acting on the x variable."""
        return Symbol(a.two_xi, a.two_x, self.apply_coeffs(alpha, a.data, a.two_x))

    def biorthogonality_residual(self) -> float:
        return float(np.abs(self.coeffs @ self.moment - np.eye(len(self.indices))).max())

    def expansion(self, f: SpectralFunction, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``sum_alpha q^alpha(y^{-1}) X^(alpha) f(x)`` for arrays of points x, y."""
        from .fourier import evaluate
        q = FundamentalTuple()
        yinv = np.swapaxes(np.asarray(y).conj(), -1, -2)
        total = 0.0
        for alpha in self.indices:
            total = total + q.monomial_values(alpha, yinv) * evaluate(self.apply(alpha, f), x)
        return total


def _value_at_identity(coeffs: np.ndarray, two_b: int) -> complex:
    return complex(sum((tj + 1) * np.trace(block_view(coeffs, two_b, tj)) for tj in range(two_b + 1)))


def taylor_operators(q: FundamentalTuple | None = None, N: int = 2, rank_tol: float = 1e-10) -> TaylorOperators:
    """Solve the moment system ``sum_gamma c[alpha, gamma] (X^gamma qr^beta)(e) = delta``.

    ``qr`` is the reflected tuple ``q(y^{-1})``; this is the duality under
    which ``f(xy) = sum_alpha q^alpha(y^{-1}) X^(alpha) f(x) + O(|y|^N)``.
    """
    if N < 1 or N > 4:
        raise ValueError("Taylor operators are provided for 1 <= N <= 4")
    q = q or FundamentalTuple()
    qr = FundamentalTuple(reflected=not q.reflected)
    indices = tuple(a for n in range(N) for a in multi_indices(n) if a[3] == 0)
    monos = tuple(normal_monomials(N - 1))
    M = np.zeros((len(monos), len(indices)), dtype=complex)
    for k, beta in enumerate(indices):
        g = qr.monomial(beta)
        for tj in range(g.two_b + 1):
            mats = monomial_matrices(tj, N - 1)
            M[:, k] += (tj + 1) * np.einsum("gpr,rp->g", mats, g.block2(tj))
    rank = np.linalg.matrix_rank(M, tol=rank_tol)
    if rank < len(indices):
        raise TaylorError(f"moment matrix is singular: rank {rank} of {len(indices)}")
    C, *_ = np.linalg.lstsq(M.T, np.eye(len(indices)), rcond=None)
    return TaylorOperators(N, indices, monos, C.T.copy(), M)


# ---------------------------------------------------------------- norms and fits

def _sup_grid(two_x: int) -> QuadratureGrid:
    return grid_for_total(max(2, 2 * two_x + 2))


def sup_norms(a: Symbol, grid: QuadratureGrid | None = None) -> np.ndarray:
    """``sup_x ||a(x, xi_j)||`` (spectral norm) per spin, grid maximum over x."""
    out = np.zeros(a.two_xi + 1)
    if a.is_x_independent():
        for tj in range(a.two_xi + 1):
            out[tj] = np.linalg.norm(a.block(tj)[..., 0], 2)
        return out
    grid = grid or _sup_grid(a.two_x)
    for tj in range(a.two_xi + 1):
        v = a.grid_values(grid, tj).reshape((tj + 1, tj + 1, -1))
        out[tj] = np.linalg.norm(np.moveaxis(v, -1, 0), 2, axis=(-2, -1)).max()
    return out


def decay_fit(norms: np.ndarray, two_js=None, window=None) -> float:
    """Least-squares slope of log norm against log <xi> over the spin window."""
    window = window or SETTINGS.fit_window
    norms = np.asarray(norms, dtype=float)
    tj = np.arange(len(norms)) if two_js is None else np.asarray(two_js)
    j = tj / 2.0
    sel = (j >= window[0]) & (j <= window[1])
    if np.any(norms[sel] <= 0):
        raise ValueError("decay fit needs positive norms on the window")
    slope, _ = np.polyfit(np.log(bracket(tj[sel])), np.log(norms[sel]), 1)
    return float(slope)


@dataclass
class SymbolClassNorm:
    m: float
    k: int
    l: int
    value: float
    two_xi_max: int


def class_norm(a: Symbol, m: float, k: int, l: int, two_xi_max: int | None = None,
               grid: QuadratureGrid | None = None) -> SymbolClassNorm:
    """max over |alpha| <= k, |beta| <= l of sup <xi>^{|beta| - m - |alpha|} ||X^alpha D^beta a||."""
    top = a.two_xi - l if two_xi_max is None else two_xi_max
    if top > a.two_xi - l:
        raise SymbolError("xi range exceeds what survives l differences")
    from .irreps import lie_basis
    basis = lie_basis()
    best = 0.0
    tj = np.arange(top + 1)
    for nb in range(l + 1):
        for beta in multi_indices(nb):
            db = difference_multi(a, beta)
            for na in range(k + 1):
                for gam in normal_monomials(na):
                    if sum(gam) != na:
                        continue
                    s = db
                    for Xk, n in zip(basis[::-1], gam[::-1]):
                        for _ in range(n):
                            s = s.x_derivative(Xk)
                    nrm = sup_norms(s, grid)[: top + 1]
                    best = max(best, float(np.max(bracket(tj) ** (nb - m - na) * nrm)))
    return SymbolClassNorm(m, k, l, best, top)


def difference_norms(a: Symbol, order: int, q: FundamentalTuple | None = None) -> np.ndarray:
    """max over |beta| = order of sup_x ||D^beta a(x, xi)||, per spin."""
    norms = None
    for beta in multi_indices(order):
        n = sup_norms(difference_multi(a, beta, q))
        norms = n if norms is None else np.maximum(norms, n)
    return norms


# ---------------------------------------------------------------- quasi-homogeneous symbols

def kappa(two_j) -> np.ndarray:
    """Symbol of |grad|, that is |xi|."""
    return size(two_j)


def kappa_power(m: float, two_j) -> np.ndarray:
    """|xi|^m with the value at the trivial representation set to 0 (1 when m = 0)."""
    tj = np.atleast_1d(np.asarray(two_j))
    k = size(tj)
    out = np.where(tj == 0, 1.0 if m == 0 else 0.0, np.power(np.where(tj == 0, 1.0, k), m))
    return out if np.ndim(two_j) else float(out[0])


@dataclass(frozen=True)
class AnalyticProfile:
    """Scalar function applied to matrices by spectral calculus; holomorphic on |z| < radius."""

    func: object
    radius: float = np.inf
    derivative: object = None

    def __call__(self, z):
        return self.func(z)


def matrix_function(f: AnalyticProfile, M: np.ndarray) -> np.ndarray:
    """f(M) via eigendecomposition, batched over leading axes."""
    w, V = np.linalg.eig(M)
    if np.abs(w).max(initial=0.0) >= f.radius:
        raise SymbolError(f"spectral radius {np.abs(w).max():.3g} outside the analyticity disk {f.radius}")
    fw = np.asarray(f(w), dtype=complex) * np.ones_like(w)
    return np.einsum("...ik,...k,...kj->...ij", V, fw, np.linalg.inv(V))


def quasi_homogeneous(f: AnalyticProfile, m: float, b: Symbol, two_x: int | None = None,
                      tol: float = 1e-10) -> Symbol:
    """``kappa(xi)^m f(b(x, xi) / kappa(xi))`` resampled to the x-band ``two_x``.

    f of a band-limited symbol is not band-limited in general; the result is
    sampled on a grid of twice the band before projecting, so the aliasing
    error is of the size of the spectral tail beyond ``2 * two_x``.
    """
    tx = b.two_x if two_x is None else two_x
    if b.is_x_independent() and two_x is None:
        tx = 0
    grid = grid_for_total(4 * max(tx, 1))
    data = np.zeros((packed_size(b.two_xi), packed_size(tx)), dtype=complex)
    for tj in range(b.two_xi + 1):
        d = tj + 1
        kp = kappa_power(m, tj)
        if tj == 0:
            val = np.broadcast_to(kp * f(np.zeros(1))[0], grid.shape)[None, None]
        else:
            k = kappa(tj)
            bv = np.moveaxis(b.grid_values(grid, tj), (0, 1), (-2, -1)) / k     # grid + (d, d)
            val = np.moveaxis(kp * matrix_function(f, bv), (-2, -1), (0, 1))
            val = val.reshape((d, d) + grid.shape)
        data[_block_slice(b.two_xi, tj)] = forward_values(grid, np.broadcast_to(val, (d, d) + grid.shape),
                                                          tx).reshape(d * d, -1)
    return Symbol(b.two_xi, tx, data)


@dataclass
class DecayReport:
    label: str
    two_js: np.ndarray
    norms: np.ndarray
    slope: float
    claimed: float
    passed: bool

    def rows(self):
        return [{"j": float(tj) / 2, "norm": float(n), "fitted_slope": self.slope}
                for tj, n in zip(self.two_js, self.norms)]


def _report(label, norms, claimed, upper_only=False) -> DecayReport:
    tj = np.arange(len(norms))
    slope = decay_fit(norms, tj)
    tol = SETTINGS.fit_tol
    ok = slope <= claimed + tol if upper_only else abs(slope - claimed) <= tol
    return DecayReport(label, tj, np.asarray(norms), slope, claimed, bool(ok))


def fit_band() -> int:
    """xi-band (doubled) needed for fits over the configured window plus two differences."""
    return int(2 * SETTINGS.fit_window[1]) + 2


def multiplier_decay(m: float, order: int, t: float = 1.0) -> DecayReport:
    """Decay of max_beta ||D^beta h(|xi|/t) I|| with ``h(lam) = (1 + lam^2)^{m/2}``."""
    tb = fit_band()
    vals = (1.0 + (size(np.arange(tb + 1)) / t) ** 2) ** (m / 2)
    a = Symbol.multiplier(vals, tb)
    norms = difference_norms(a, order)
    return _report(f"multiplier m={m} |beta|={order}", norms, m - order)


def dkappa_probe(m: float) -> DecayReport:
    """Fit ``max_mu ||D_mu kappa^m - m kappa^{m-1} D_mu kappa||`` over the window."""
    tb = fit_band()
    tj = np.arange(tb + 1)
    km = Symbol.multiplier(kappa_power(m, tj), tb)
    k1 = Symbol.multiplier(kappa(tj), tb)
    coef = Symbol.multiplier(m * kappa_power(m - 1, tj), tb)
    q = FundamentalTuple()
    norms = np.zeros(tb)
    for key in TUPLE_KEYS:
        diff = difference_op(key, km) - coef.matmul(difference_op(key, k1))
        norms = np.maximum(norms, sup_norms(diff))
    rep = DecayReport(f"dkappa m={m}", tj[:tb], norms, np.nan, m - 2, True)
    if norms.max() == 0.0:
        rep.slope = -np.inf
        return rep
    rep.slope = decay_fit(norms, tj[:tb])
    rep.passed = bool(rep.slope <= m - 2 + SETTINGS.fit_tol)
    return rep



def qh_base(two_xi: int, scale: float = 0.3, seed: int = 0) -> Symbol:
    """Vector-field symbol ``scale (1 + c(x) / 2) sigma_X`` with c a real spin-1/2 function, sup|c| = 1."""
    from .fourier import random_spectral
    c = random_spectral(1, np.random.default_rng(seed), real=True)
    c = np.where(packed_spins(1) == 1, c.coeffs, 0.0)
    c = c / np.abs(inverse_values(grid_for_total(4), c, 1)).max()
    coef = SpectralFunction(1, scale * (resize_packed(np.ones(1), 0, 1) + c / 2))
    return Symbol.vector_field(lie_basis()[0], two_xi).times_function(coef)


EXP_PROFILE = AnalyticProfile(np.exp)
_QH_CACHE: dict = {}


def _qh_symbol(m: float, f: AnalyticProfile) -> Symbol:
    key = (float(m), id(f), fit_band())
    if key not in _QH_CACHE:
        _QH_CACHE[key] = quasi_homogeneous(f, m, qh_base(fit_band()))
    return _QH_CACHE[key]


def quasi_homogeneous_probe(m: float, order: int, f: AnalyticProfile = EXP_PROFILE) -> DecayReport:
    """Decay of max_beta sup_x ||D^beta kappa^m f(b / kappa)||; claimed order m - |beta|."""
    a = _qh_symbol(m, f)
    return _report(f"quasi-homogeneous m={m} |beta|={order}", difference_norms(a, order), m - order)


def commutator_order_probe(f: AnalyticProfile = EXP_PROFILE) -> DecayReport:
    """sup_x ||[a, sigma_Y](x, xi)|| for a = kappa f(b / kappa): claimed order at most 1."""
    tb = fit_band()
    a = _qh_symbol(1.0, f)
    c = a.commutator(Symbol.vector_field(lie_basis()[1], tb))
    return _report("commutator order drop", sup_norms(c), 1.0, upper_only=True)


def taylor_remainder_sweep(T: TaylorOperators, two_b: int = 4, n_points: int = 8,
                           eps=None, seed: int = 0):
    """Max |f(xy) - expansion| over random x, y = exp(eps Y) with |Y| = 1.

    Returns (eps, residuals, fitted log-log slope); the slope should be T.order.
    """
    from .fourier import evaluate, random_spectral
    from .group import exp_algebra, random_matrices
    rng = np.random.default_rng(seed)
    eps = np.geomspace(0.2, 0.02, 7) if eps is None else np.asarray(eps, dtype=float)
    f = random_spectral(two_b, rng)
    x = random_matrices(n_points, rng)
    dirs = rng.standard_normal((n_points, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    basis = lie_basis()
    res = []
    for e in eps:
        y = np.array([exp_algebra(e * sum(c * X for c, X in zip(d, basis))).u for d in dirs])
        exact = evaluate(f, x @ y)
        res.append(float(np.abs(exact - T.expansion(f, x, y)).max()))
    res = np.array(res)
    slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    return eps, res, slope
