"""Non-commutative Fourier transform on SU(2).

Conventions::

    f^(xi) = int f(x) xi(x)^* dx                (matrix, rows/cols m = -j..j)
    f(x)   = sum_xi d_xi Tr(f^(xi) xi(x))
    ||f||_{H^s}^2 = sum_xi d_xi <xi>^{2s} ||f^(xi)||_HS^2

A :class:`SpectralFunction` stores all blocks ``f^(j)``, ``0 <= j <= B``,
concatenated row-major into one flat vector ("packed" layout).  Transforms
act on the trailing axis, so a stack of functions is just a 2-d array.

The transforms factor through the Euler chart: the alpha and gamma sums are
small DFTs over (half-)integer frequencies and the beta sum is a
Gauss-Legendre contraction against tabulated little-d matrices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .config import SETTINGS
from .group import QuadratureGrid, grid_for_total, two
from .irreps import bracket, dim, little_d


class TruncationError(RuntimeError):
    """Raised when an operation would silently drop spectral mass."""


# ---------------------------------------------------------------- packed layout

@lru_cache(maxsize=None)
def offsets(two_b: int) -> np.ndarray:
    """Start index of each block in the packed layout (length two_b + 2)."""
    sizes = [(tj + 1) ** 2 for tj in range(two_b + 1)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(int)


def packed_size(two_b: int) -> int:
    return int(offsets(two_b)[-1])


@lru_cache(maxsize=None)
def packed_spins(two_b: int) -> np.ndarray:
    """two_j of every packed entry."""
    return np.concatenate([np.full((tj + 1) ** 2, tj) for tj in range(two_b + 1)])


def block_view(coeffs: np.ndarray, two_b: int, two_j: int) -> np.ndarray:
    o = offsets(two_b)
    d = two_j + 1
    return coeffs[..., o[two_j]:o[two_j + 1]].reshape(coeffs.shape[:-1] + (d, d))


def resize_packed(coeffs: np.ndarray, two_b_from: int, two_b_to: int) -> np.ndarray:
    """Zero-pad or cut the packed layout (no mass check; see :func:`truncate`)."""
    n_to = packed_size(two_b_to)
    n_from = packed_size(two_b_from)
    if two_b_to >= two_b_from:
        out = np.zeros(coeffs.shape[:-1] + (n_to,), dtype=complex)
        out[..., :n_from] = coeffs
        return out
    return np.array(coeffs[..., :n_to], dtype=complex)


def plancherel_weights(two_b: int, s: float = 0.0) -> np.ndarray:
    """Per-entry weights w with ||f||_{H^s}^2 = sum w |c|^2."""
    tj = packed_spins(two_b)
    return (tj + 1.0) * bracket(tj) ** (2 * s)


def truncate(coeffs: np.ndarray, two_b_from: int, two_b_to: int, allow: bool = False,
             tol: float | None = None) -> tuple[np.ndarray, float]:
    """Cut to a smaller band and report the discarded relative Plancherel mass.

    Without ``allow`` a relative loss above the configured tolerance raises
    :class:`TruncationError`.
    """
    tol = SETTINGS.truncation_tol if tol is None else tol
    if two_b_to >= two_b_from:
        return resize_packed(coeffs, two_b_from, two_b_to), 0.0
    w = plancherel_weights(two_b_from)
    n_to = packed_size(two_b_to)
    mass = np.abs(coeffs) ** 2 * w
    total = float(mass.sum())
    lost = float(mass[..., n_to:].sum())
    rel = lost / total if total > 0 else 0.0
    if rel > tol and not allow:
        raise TruncationError(f"truncation would discard relative mass {rel:.3e}")
    return np.array(coeffs[..., :n_to], dtype=complex), rel


# ---------------------------------------------------------------- containers

@dataclass(frozen=True)
class SpectralFunction:
    """Band-limited function stored through its Fourier coefficients."""

    two_b: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (packed_size(self.two_b),):
            raise ValueError(f"expected {packed_size(self.two_b)} packed coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def bandlimit(self) -> Fraction:
        return Fraction(self.two_b, 2)

    def block(self, j) -> np.ndarray:
        return block_view(self.coeffs, self.two_b, two(j))

    def block2(self, two_j: int) -> np.ndarray:
        return block_view(self.coeffs, self.two_b, two_j)

    @classmethod
    def zeros(cls, two_b: int) -> "SpectralFunction":
        return cls(two_b, np.zeros(packed_size(two_b), dtype=complex))

    @classmethod
    def from_blocks(cls, blocks: dict, two_b: int | None = None) -> "SpectralFunction":
        """Build from ``{two_j: matrix}``."""
        tb = max(blocks) if two_b is None else two_b
        c = np.zeros(packed_size(tb), dtype=complex)
        for tj, m in blocks.items():
            block_view(c, tb, tj)[...] = m
        return cls(tb, c)

    @classmethod
    def constant(cls, value: complex = 1.0, two_b: int = 0) -> "SpectralFunction":
        return cls.from_blocks({0: np.array([[value]])}, two_b)

    @classmethod
    def entry(cls, two_j: int, m_index: int, n_index: int, two_b: int | None = None):
        """The matrix-entry function x -> D^j_{mn}(x) (array indices, ascending)."""
        d = two_j + 1
        blk = np.zeros((d, d), dtype=complex)
        blk[n_index, m_index] = 1.0 / d
        return cls.from_blocks({two_j: blk}, two_j if two_b is None else two_b)

    def resized(self, two_b: int, allow_truncation: bool = False) -> "SpectralFunction":
        c, _ = truncate(self.coeffs, self.two_b, two_b, allow=allow_truncation)
        return SpectralFunction(two_b, c)

    def __add__(self, other):
        tb = max(self.two_b, other.two_b)
        return SpectralFunction(tb, resize_packed(self.coeffs, self.two_b, tb)
                                + resize_packed(other.coeffs, other.two_b, tb))

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return SpectralFunction(self.two_b, scalar * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def conj_function(self) -> "SpectralFunction":
        """Coefficients of the complex conjugate function."""
        out = np.zeros_like(self.coeffs)
        for tj in range(self.two_b + 1):
            # conj(D^j_{qp}) = (-1)^{q-p} D^j_{-q,-p}
            m2 = np.arange(-tj, tj + 1, 2)
            sign = (-1.0) ** ((m2[:, None] - m2[None, :]) // 2)
            blk = self.block2(tj)
            block_view(out, self.two_b, tj)[...] = sign * blk[::-1, ::-1].conj()
        return SpectralFunction(self.two_b, out)

    def real_part(self) -> "SpectralFunction":
        return 0.5 * (self + self.conj_function())

    def to_json(self) -> str:
        return json.dumps(to_records(self))

    @classmethod
    def from_json(cls, text: str) -> "SpectralFunction":
        return from_records(json.loads(text))


def to_records(f: SpectralFunction) -> dict:
    blocks = []
    for tj in range(f.two_b + 1):
        blk = f.block2(tj)
        blocks.append({"two_j": tj,
                       "rows": [[[float(z.real), float(z.imag)] for z in row] for row in blk]})
    return {"two_b": f.two_b, "blocks": blocks}


def from_records(rec: dict) -> SpectralFunction:
    blocks = {}
    for b in rec["blocks"]:
        arr = np.array(b["rows"], dtype=float)
        blocks[int(b["two_j"])] = arr[..., 0] + 1j * arr[..., 1]
    return SpectralFunction.from_blocks(blocks, int(rec["two_b"]))


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function on the nodes of a quadrature grid (3-d layout)."""

    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[-3:] != self.grid.shape:
            v = v.reshape(v.shape[:-1] + self.grid.shape)
        object.__setattr__(self, "values", v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(self.values.shape[:-3] + (-1,))

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * other)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)

    def integral(self):
        return self.grid.integrate(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))


def sample(grid: QuadratureGrid, fn) -> GridFunction:
    """Evaluate ``fn`` on the grid; ``fn`` receives an array of SU(2) matrices."""
    return GridFunction(grid, np.asarray(fn(grid.matrices)).reshape(grid.shape))


# ---------------------------------------------------------------- transform engine

def _tables(grid: QuadratureGrid, two_b: int):
    key = ("tables", two_b)
    if key not in grid._cache:
        shifts = np.arange(-two_b, two_b + 1) / 2.0          # q = -B..B in half steps
        ea = np.exp(-1j * np.outer(grid.alpha, shifts))       # (Na, nq)
        eg = np.exp(-1j * np.outer(grid.gamma, shifts))       # (Ng, nq)
        dtabs = [np.transpose(little_d(tj, grid.beta), (1, 2, 0)) for tj in range(two_b + 1)]  # (d,d,Nb)
        grid._cache[key] = (ea, eg, dtabs)
    return grid._cache[key]


def _index(two_j: int, two_b: int) -> np.ndarray:
    """Positions of the weights of spin j inside the shift axis of length 2B+1."""
    return np.arange(-two_j, two_j + 1, 2) + two_b


def forward_values(grid: QuadratureGrid, values: np.ndarray, two_b: int) -> np.ndarray:
    """Packed Fourier coefficients of grid samples (trailing axes = grid axes)."""
    if two_b > grid.two_b:
        raise ValueError(f"grid bandlimit {grid.bandlimit} below requested {Fraction(two_b, 2)}")
    v = np.asarray(values)
    if v.shape[-3:] != grid.shape:
        v = v.reshape(v.shape[:-1] + grid.shape)
    ea, eg, dtabs = _tables(grid, two_b)
    batch = v.shape[:-3]
    wa = (ea.conj() * grid.w_alpha[:, None])
    wg = (eg.conj() * grid.w_gamma[:, None])
    # F[..., q, b, p] = sum_{a,c} w f e^{i q alpha} e^{i p gamma}
    F = np.tensordot(v, wa, axes=([-3], [0]))            # (..., Nb, Ng, nq)
    F = np.tensordot(F, wg, axes=([-2], [0]))            # (..., Nb, nq, np)
    F = np.moveaxis(F, -3, -2)                           # (..., nq, Nb, np)
    out = np.empty(batch + (packed_size(two_b),), dtype=complex)
    o = offsets(two_b)
    wb = grid.w_beta
    for tj in range(two_b + 1):
        idx = _index(tj, two_b)
        Fj = F[..., idx, :, :][..., idx]                 # (..., d_q, Nb, d_p)
        blk = np.einsum("...qbp,qpb->...pq", Fj, dtabs[tj] * wb)
        out[..., o[tj]:o[tj + 1]] = blk.reshape(batch + (-1,))
    return out


def inverse_values(grid: QuadratureGrid, coeffs: np.ndarray, two_b: int) -> np.ndarray:
    """Evaluate packed spectra on the grid; output shape ``batch + grid.shape``."""
    c = np.asarray(coeffs)
    batch = c.shape[:-1]
    ea, eg, dtabs = _tables(grid, two_b)
    nq = 2 * two_b + 1
    nb = grid.beta.size
    G = np.zeros(batch + (nq, nb, nq), dtype=complex)
    for tj in range(two_b + 1):
        idx = _index(tj, two_b)
        blk = block_view(c, two_b, tj)                   # (..., p, q)
        contrib = (tj + 1) * np.einsum("...pq,qpb->...qbp", blk, dtabs[tj])
        G[..., idx[:, None, None], np.arange(nb)[None, :, None], idx[None, None, :]] += contrib
    vals = np.tensordot(G, ea, axes=([-3], [1]))        # (..., Nb, np, Na)
    vals = np.tensordot(vals, eg, axes=([-2], [1]))     # (..., Nb, Na, Ng)
    return np.moveaxis(vals, -3, -2)                     # (..., Na, Nb, Ng)


def forward(f: GridFunction, B) -> SpectralFunction:
    tb = two(B)
    return SpectralFunction(tb, forward_values(f.grid, f.values, tb))


def inverse(a: SpectralFunction, grid: QuadratureGrid) -> GridFunction:
    if a.two_b > grid.two_b:
        raise ValueError("grid bandlimit below the spectrum's bandlimit")
    return GridFunction(grid, inverse_values(grid, a.coeffs, a.two_b))


def evaluate(a: SpectralFunction, u: np.ndarray) -> np.ndarray:
    """Pointwise evaluation at arbitrary SU(2) matrices ``u`` (shape (..., 2, 2))."""
    from .irreps import wigner_matrices
    u = np.asarray(u)
    out = np.zeros(u.shape[:-2], dtype=complex)
    for tj in range(a.two_b + 1):
        D = wigner_matrices(tj, u)
        out += (tj + 1) * np.einsum("pq,...qp->...", a.block2(tj), D)
    return out


# ---------------------------------------------------------------- norms and products

def sobolev_norm(a: SpectralFunction, s: float = 0.0) -> float:
    return float(np.sqrt(np.sum(plancherel_weights(a.two_b, s) * np.abs(a.coeffs) ** 2)))


def plancherel_norm(a: SpectralFunction) -> float:
    return sobolev_norm(a, 0.0)


def inner(a: SpectralFunction, b: SpectralFunction) -> complex:
    """L^2 inner product <a, b> = sum d Tr(a^ b^*)."""
    tb = max(a.two_b, b.two_b)
    ca = resize_packed(a.coeffs, a.two_b, tb)
    cb = resize_packed(b.coeffs, b.two_b, tb)
    return complex(np.sum(plancherel_weights(tb) * ca * cb.conj()))


def product_coeffs(ca: np.ndarray, two_a: int, cb: np.ndarray, two_bb: int,
                   two_out: int | None = None, allow_truncation: bool = False):
    """Packed coefficients of pointwise products (batched over leading axes).

    Returns ``(coeffs, two_out, lost)`` where ``lost`` is the discarded
    relative mass when ``two_out`` is below ``two_a + two_bb``.
    """
    full = two_a + two_bb
    grid = grid_for_total(2 * full)
    va = inverse_values(grid, ca, two_a)
    vb = inverse_values(grid, cb, two_bb)
    c = forward_values(grid, va * vb, full)
    if two_out is None:
        return c, full, 0.0
    c, lost = truncate(c, full, two_out, allow=allow_truncation)
    return c, two_out, lost


def multiply(a: SpectralFunction, b: SpectralFunction, out_B=None,
             allow_truncation: bool = False) -> SpectralFunction:
    """Pointwise product, exact on a grid adapted to the sum of bandlimits."""
    two_out = None if out_B is None else two(out_B)
    c, tb, _ = product_coeffs(a.coeffs, a.two_b, b.coeffs, b.two_b, two_out, allow_truncation)
    return SpectralFunction(tb, c)


def convolve_spectral(f: SpectralFunction, g: SpectralFunction) -> SpectralFunction:
    """Spectrum of the right convolution f*g, which is g^ f^ blockwise."""
    tb = min(f.two_b, g.two_b)
    blocks = {tj: g.block2(tj) @ f.block2(tj) for tj in range(tb + 1)}
    return SpectralFunction.from_blocks(blocks, tb)


def convolve(f: GridFunction, g: GridFunction, B=None) -> GridFunction:
    """Right convolution (f*g)(x) = int f(y) g(y^{-1} x) dy of grid samples.

    Both inputs are expanded up to the band ``B`` (default: the grid's);
    the result is returned on the same grid.
    """
    grid = f.grid
    tb = grid.two_b if B is None else two(B)
    fh = forward(f, Fraction(tb, 2))
    gh = forward(g, Fraction(tb, 2))
    return inverse(convolve_spectral(fh, gh), grid)


def random_spectral(two_b: int, rng: np.random.Generator, decay: float = 0.0,
                    real: bool = False) -> SpectralFunction:
    """Random spectrum with blocks scaled by <xi>^{-decay}."""
    n = packed_size(two_b)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c *= bracket(packed_spins(two_b)) ** (-decay) / np.sqrt(packed_spins(two_b) + 1.0)
    f = SpectralFunction(two_b, c)
    return f.real_part() if real else f


# ---------------------------------------------------------------- left-invariant derivatives

def derivative_coeffs(coeffs: np.ndarray, two_b: int, X: np.ndarray) -> np.ndarray:
    """Packed spectrum of X f, using (X f)^(xi) = d xi(X) f^(xi)."""
    from .irreps import drep2
    out = np.empty_like(np.asarray(coeffs, dtype=complex))
    for tj in range(two_b + 1):
        blk = block_view(coeffs, two_b, tj)
        block_view(out, two_b, tj)[...] = np.einsum("pr,...rq->...pq", drep2(tj, X), blk)
    return out


def derivative(f: SpectralFunction, X: np.ndarray) -> SpectralFunction:
    return SpectralFunction(f.two_b, derivative_coeffs(f.coeffs, f.two_b, X))


def laplacian(f: SpectralFunction) -> SpectralFunction:
    from .irreps import laplace_eigenvalue2
    return SpectralFunction(f.two_b, -laplace_eigenvalue2(packed_spins(f.two_b)) * f.coeffs)


def conj_coeffs(coeffs: np.ndarray, two_b: int) -> np.ndarray:
    """Batched version of :meth:`SpectralFunction.conj_function`."""
    c = np.asarray(coeffs)
    out = np.empty(c.shape, dtype=complex)
    for tj in range(two_b + 1):
        m2 = np.arange(-tj, tj + 1, 2)
        sign = (-1.0) ** ((m2[:, None] - m2[None, :]) // 2)
        block_view(out, two_b, tj)[...] = sign * block_view(c, two_b, tj)[..., ::-1, ::-1].conj()
    return out


def evaluation_matrix(two_b: int, u: np.ndarray) -> np.ndarray:
    """Matrix E with f(u_k) = (E @ coeffs)_k for packed spectra up to ``two_b``."""
    from .irreps import wigner_matrices
    u = np.asarray(u).reshape(-1, 2, 2)
    cols = []
    for tj in range(two_b + 1):
        D = wigner_matrices(tj, u)                      # (n, p, q) -> pairs with coeff [q, p]
        cols.append(((tj + 1) * np.swapaxes(D, -1, -2)).reshape(len(u), -1))
    return np.concatenate(cols, axis=1)
