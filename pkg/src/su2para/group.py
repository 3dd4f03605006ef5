"""Arithmetic on SU(2), the ZYZ Euler chart, Haar quadrature and distance.

Group elements are 2x2 complex unitary matrices with unit determinant,
written in the basis ordered by ascending weight ``m = -1/2, +1/2``.  In
that basis the Euler chart reads

    u(alpha, beta, gamma) = [[ a, b], [-conj(b), conj(a)]],
    a = exp(i(alpha+gamma)/2) cos(beta/2),
    b = exp(i(alpha-gamma)/2) sin(beta/2),

which is exactly the spin-1/2 Wigner matrix ``D^{1/2}(alpha, beta, gamma)``
of :mod:`su2para.irreps`.  The ranges ``alpha in [0, 2pi)``,
``beta in [0, pi]``, ``gamma in [0, 4pi)`` cover SU(2) once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from functools import lru_cache

import numpy as np

from .config import SETTINGS

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi

UNITARY_TOL = 1e-12
REJECT_TOL = 1e-6


def two(j) -> int:
    """Return ``2j`` as an int, rejecting anything that is not a half-integer."""
    if isinstance(j, (int, np.integer)) and not isinstance(j, bool):
        return 2 * int(j)
    x = Fraction(j).limit_denominator(4) if not isinstance(j, Fraction) else j
    t = 2 * x
    if t.denominator != 1 or abs(float(t) - 2 * float(j)) > 1e-9 or t < 0:
        raise ValueError(f"{j!r} is not a non-negative half-integer")
    return int(t)


def _drift(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(max(np.abs(u @ u.conj().T - np.eye(2)).max(), abs(np.linalg.det(u) - 1.0)))


def project_su2(u: np.ndarray) -> np.ndarray:
    """Nearest SU(2) matrix (polar factor, then determinant phase removed)."""
    w, _, vh = np.linalg.svd(u)
    p = w @ vh
    return p / np.sqrt(np.linalg.det(p))


@dataclass(frozen=True)
class GroupPoint:
    """An element of SU(2) stored as its defining 2x2 matrix."""

    u: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=complex)
        if u.shape != (2, 2):
            raise ValueError("GroupPoint needs a 2x2 matrix")
        drift = _drift(u)
        if not np.isfinite(drift) or drift > REJECT_TOL:
            raise ValueError(f"matrix is not in SU(2) (drift {drift:.2e})")
        if drift > UNITARY_TOL:
            u = project_su2(u)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    def __matmul__(self, other: "GroupPoint") -> "GroupPoint":
        return multiply(self, other)

    def __repr__(self):
        a, b = self.u[0]
        return f"GroupPoint(a={a:.6g}, b={b:.6g})"

    def allclose(self, other: "GroupPoint", tol: float = 1e-12) -> bool:
        return bool(np.abs(self.u - other.u).max() <= tol)


IDENTITY = GroupPoint(np.eye(2))


def identity() -> GroupPoint:
    return IDENTITY


def multiply(g: GroupPoint, h: GroupPoint) -> GroupPoint:
    return GroupPoint(g.u @ h.u)


def inverse(g: GroupPoint) -> GroupPoint:
    return GroupPoint(g.u.conj().T)


# ---------------------------------------------------------------- Euler chart

@dataclass(frozen=True)
class EulerAngles:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (0 <= self.alpha < TWO_PI + 1e-12 and 0 <= self.beta <= np.pi + 1e-12
                and 0 <= self.gamma < FOUR_PI + 1e-12):
            raise ValueError(f"Euler angles out of range: {self}")

    def as_tuple(self):
        return (self.alpha, self.beta, self.gamma)


def euler_matrices(alpha, beta, gamma) -> np.ndarray:
    """Vectorized chart map; returns an array of shape ``broadcast + (2, 2)``."""
    alpha, beta, gamma = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (alpha, beta, gamma)))
    a = np.exp(0.5j * (alpha + gamma)) * np.cos(0.5 * beta)
    b = np.exp(0.5j * (alpha - gamma)) * np.sin(0.5 * beta)
    u = np.empty(alpha.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = a
    u[..., 0, 1] = b
    u[..., 1, 0] = -b.conj()
    u[..., 1, 1] = a.conj()
    return u


def matrix_euler(u: np.ndarray):
    """Vectorized inverse chart for arrays of SU(2) matrices.

    At ``beta in {0, pi}`` only ``alpha + gamma`` (resp. ``alpha - gamma``)
    is determined; the representative with ``gamma = 0`` is returned when it
    lies in the chart, otherwise ``gamma = 2 pi``.
    """
    u = np.asarray(u)
    a = u[..., 0, 0]
    b = u[..., 0, 1]
    ra, rb = np.abs(a), np.abs(b)
    beta = 2.0 * np.arctan2(rb, ra)
    A = np.angle(a)
    B = np.angle(b)
    eps = 1e-15
    deg_a = ra <= eps  # beta = pi
    deg_b = rb <= eps  # beta = 0
    B = np.where(deg_b, A, B)
    A = np.where(deg_a, B, A)
    raw_alpha = A + B
    # beta = 0: alpha + gamma = 2A, beta = pi: alpha - gamma = 2B; both give raw = 2A or 2B here
    k = np.floor(raw_alpha / TWO_PI)
    alpha = raw_alpha - TWO_PI * k
    # a tiny negative raw_alpha lands just below 2pi: treat it as 0 instead
    near = alpha > TWO_PI - 1e-13
    k = np.where(near, k + 1, k)
    alpha = np.where(near, 0.0, alpha)
    gamma = np.mod(A - B - TWO_PI * k, FOUR_PI)
    # canonical representative at degenerate beta: gamma in {0, 2pi}
    deg = deg_a | deg_b
    if np.any(deg):
        s = np.where(deg_a, -1.0, 1.0)
        total = np.mod(np.where(deg_a, 2 * B, 2 * A), FOUR_PI)
        lo = total < TWO_PI
        alpha = np.where(deg, np.where(lo, total, total - TWO_PI), alpha)
        gamma = np.where(deg, np.where(lo, 0.0, np.mod(s * TWO_PI, FOUR_PI)), gamma)
    # rounding can leave alpha at 2pi; shifting alpha by 2pi shifts gamma by 2pi as well
    wrap = alpha >= TWO_PI
    alpha = np.where(wrap, alpha - TWO_PI, alpha)
    gamma = np.where(wrap, np.mod(gamma - TWO_PI, FOUR_PI), gamma)
    alpha = np.where(alpha < 0, 0.0, alpha)
    gamma = np.where(gamma >= FOUR_PI, gamma - FOUR_PI, gamma)
    return alpha, beta, gamma


def from_euler(e: EulerAngles | tuple) -> GroupPoint:
    if not isinstance(e, EulerAngles):
        e = EulerAngles(*e)
    return GroupPoint(euler_matrices(e.alpha, e.beta, e.gamma))


def to_euler(g: GroupPoint) -> EulerAngles:
    al, be, ga = matrix_euler(g.u)
    return EulerAngles(float(al), float(min(be, np.pi)), float(ga))


# ---------------------------------------------------------------- sampling and distance

def random_matrices(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed SU(2) matrices via normalized Gaussian quaternions."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a = q[:, 0] + 1j * q[:, 1]
    b = q[:, 2] + 1j * q[:, 3]
    u = np.empty((n, 2, 2), dtype=complex)
    u[:, 0, 0], u[:, 0, 1], u[:, 1, 0], u[:, 1, 1] = a, b, -b.conj(), a.conj()
    return u


def random_points(n: int, rng: np.random.Generator) -> list[GroupPoint]:
    return [GroupPoint(u) for u in random_matrices(n, rng)]


def rotation_angle(u: np.ndarray) -> np.ndarray:
    """Angle theta in [0, 2pi] with u conjugate to diag(e^{i theta/2}, e^{-i theta/2})."""
    u = np.asarray(u)
    w = 0.5 * np.real(u[..., 0, 0] + u[..., 1, 1])
    # |Im part| of the unit quaternion, computed from the entries for stability
    v = np.sqrt(np.imag(u[..., 0, 0]) ** 2 + np.abs(u[..., 0, 1]) ** 2 + 0.0)
    v = 0.5 * (v + np.sqrt(np.imag(u[..., 1, 1]) ** 2 + np.abs(u[..., 1, 0]) ** 2))
    return 2.0 * np.arctan2(v, w)


def distance_scale() -> float:
    """Geodesic length per unit rotation angle under the configured metric."""
    return float(np.sqrt(2.0 * SETTINGS.metric_scale))


def distance_matrix_arrays(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bi-invariant distance between (arrays of) SU(2) matrices."""
    rel = np.swapaxes(np.conj(u), -1, -2) @ v
    return distance_scale() * rotation_angle(rel)


def distance(g: GroupPoint, h: GroupPoint) -> float:
    return float(distance_matrix_arrays(g.u, h.u))


def exp_algebra(X: np.ndarray) -> GroupPoint:
    """Exponential of an element of su(2) given as a 2x2 anti-Hermitian matrix."""
    from scipy.linalg import expm
    return GroupPoint(expm(np.asarray(X, dtype=complex)))


# ---------------------------------------------------------------- Haar quadrature

class QuadratureError(RuntimeError):
    pass


class QuadratureGrid:
    """Tensor-product quadrature for the normalized Haar measure.

    Nodes are ``(alpha_a, beta_b, gamma_c)`` with uniform ``alpha`` on
    ``[0, 2pi)``, Gauss-Legendre ``cos(beta)`` and uniform ``gamma`` on
    ``[0, 4pi)``.  The rule integrates every product
    ``D^{j1}_{m1 n1} conj(D^{j2}_{m2 n2})`` with ``j1, j2 <= B`` exactly.
    Flattened node order is C-order over ``(alpha, beta, gamma)``.
    """

    def __init__(self, two_b: int, n_alpha: int | None = None, n_beta: int | None = None,
                 n_gamma: int | None = None):
        if two_b < 1:
            raise ValueError("haar_grid needs B >= 1/2")
        self.two_b = int(two_b)
        n_alpha = n_alpha or 2 * self.two_b + 2          # 4B + 2
        n_gamma = n_gamma or 4 * self.two_b + 2          # 8B + 2
        n_beta = n_beta or self.two_b // 2 + 1           # exact to degree 2B in cos(beta)
        self.alpha = TWO_PI * np.arange(n_alpha) / n_alpha
        self.gamma = FOUR_PI * np.arange(n_gamma) / n_gamma
        x, wx = np.polynomial.legendre.leggauss(n_beta)
        self.beta = np.arccos(x)[::-1].copy()
        self.w_alpha = np.full(n_alpha, 1.0 / n_alpha)
        self.w_beta = (0.5 * wx)[::-1].copy()
        self.w_gamma = np.full(n_gamma, 1.0 / n_gamma)
        self._cache: dict = {}
        for arr in (self.alpha, self.beta, self.gamma, self.w_alpha, self.w_beta, self.w_gamma):
            arr.setflags(write=False)

    @property
    def bandlimit(self) -> Fraction:
        return Fraction(self.two_b, 2)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.alpha.size, self.beta.size, self.gamma.size)

    @property
    def size(self) -> int:
        a, b, c = self.shape
        return a * b * c

    @property
    def weights(self) -> np.ndarray:
        return (self.w_alpha[:, None, None] * self.w_beta[None, :, None]
                * self.w_gamma[None, None, :]).ravel()

    def angles(self):
        A, Bt, G = np.meshgrid(self.alpha, self.beta, self.gamma, indexing="ij")
        return A.ravel(), Bt.ravel(), G.ravel()

    @property
    def matrices(self) -> np.ndarray:
        if "matrices" not in self._cache:
            self._cache["matrices"] = euler_matrices(*self.angles())
        return self._cache["matrices"]

    @property
    def nodes(self) -> list[GroupPoint]:
        return [GroupPoint(u) for u in self.matrices]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature over the trailing grid axes (either flat or 3-d)."""
        v = np.asarray(values)
        if v.shape[-3:] == self.shape:
            return np.einsum("...abc,a,b,c->...", v, self.w_alpha, self.w_beta, self.w_gamma)
        return v @ self.weights

    def schur_residual(self, two_b: int | None = None) -> float:
        """Largest deviation of the Schur orthogonality relations up to ``two_b``.

        The quadrature of every entry product is evaluated in factorized form
        (alpha sum x beta sum x gamma sum), which is algebraically the same as
        summing over all nodes.
        """
        from .irreps import little_d, dim
        tb = self.two_b if two_b is None else two_b
        twos = np.arange(0, tb + 1)
        labels = []  # (two_j, two_m, two_n)
        rows = []
        for tj in twos:
            d = little_d(int(tj), self.beta)  # (Nb, d, d)
            ms = np.arange(-tj, tj + 1, 2)
            for i, tm in enumerate(ms):
                for k, tn in enumerate(ms):
                    labels.append((tj, tm, tn))
                    rows.append(d[:, i, k])
        lab = np.array(labels)
        P = np.array(rows)  # (E, Nb)
        beta_part = (P * self.w_beta) @ P.T
        tm = lab[:, 1]
        tn = lab[:, 2]
        # alpha and gamma sums depend only on the weight differences
        shifts = np.arange(-2 * tb, 2 * tb + 1) / 2.0
        ea = np.exp(-1j * np.outer(shifts, self.alpha)) @ self.w_alpha
        eg = np.exp(-1j * np.outer(shifts, self.gamma)) @ self.w_gamma
        gram = ea[tm[:, None] - tm[None, :] + 2 * tb] * eg[tn[:, None] - tn[None, :] + 2 * tb]
        gram *= beta_part
        target = np.zeros(gram.shape)
        idx = np.arange(len(lab))
        target[idx, idx] = 1.0 / (lab[:, 0] + 1.0)
        return float(np.abs(gram - target).max())


def haar_grid(B, self_test: bool = True, tol: float = 1e-10) -> QuadratureGrid:
    """Quadrature grid exact for entry products up to spin ``B``.

    A Schur-orthogonality self-test runs on construction and raises
    :class:`QuadratureError` if any relation is off by more than ``tol``.
    """
    tb = two(B)
    grid = QuadratureGrid(tb)
    if abs(grid.weights.sum() - 1.0) > 1e-12:
        raise QuadratureError("weights do not sum to one")
    if self_test:
        res = grid.schur_residual()
        if res > tol:
            raise QuadratureError(f"Schur self-test failed at B={grid.bandlimit}: residual {res:.3e}")
    return grid


def grid_for_total(two_total: int, self_test: bool = False) -> QuadratureGrid:
    """Grid exact for integrals of entry products whose spins sum to at most ``two_total / 2``.

    Grids are shared (and keep their transform tables) across calls.
    """
    tb = max(1, (int(two_total) + 1) // 2)
    grid = _shared_grid(tb)
    if self_test and grid.schur_residual() > 1e-10:
        raise QuadratureError(f"Schur self-test failed at B={grid.bandlimit}")
    return grid


@lru_cache(maxsize=16)
def _shared_grid(two_b: int) -> QuadratureGrid:
    return haar_grid(Fraction(two_b, 2), self_test=False)
