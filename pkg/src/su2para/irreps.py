"""Irreducible representations of SU(2).

Spins are carried as the integer ``two_j = 2j``.  Matrix rows and columns
are indexed by ``m = -j, ..., j`` in ascending order, in every module.

The Wigner matrix is ``D^j(alpha, beta, gamma) = exp(-i alpha J_z)
exp(-i beta J_y) exp(-i gamma J_z)``, so its entries are
``exp(-i m alpha) d^j_{mn}(beta) exp(-i n gamma)``.  For ``j = 1/2`` this
reproduces the defining matrix of :mod:`su2para.group`.

The little-d matrix is evaluated as ``V diag(exp(-i beta mu)) V^*`` where
``J_y = V diag(mu) V^*``; the eigenvectors are computed once per spin.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .config import SETTINGS
from .group import GroupPoint, matrix_euler, two


def dim(two_j: int) -> int:
    return int(two_j) + 1


def weights(two_j: int) -> np.ndarray:
    """Weights m (as floats) in ascending order."""
    return np.arange(-two_j, two_j + 1, 2) / 2.0


@lru_cache(maxsize=None)
def spin_matrices(two_j: int):
    """Hermitian angular momentum matrices (J_x, J_y, J_z) in the ascending basis."""
    j = two_j / 2.0
    m = weights(two_j)
    d = dim(two_j)
    jp = np.zeros((d, d))
    for k in range(d - 1):
        jp[k + 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jx = (0.5 * (jp + jp.T)).astype(complex)
    jy = (jp - jp.T) / 2j
    jz = np.diag(m).astype(complex)
    for a in (jx, jy, jz):
        a.setflags(write=False)
    return jx, jy, jz


@lru_cache(maxsize=None)
def _jy_eig(two_j: int):
    _, jy, _ = spin_matrices(two_j)
    mu, v = np.linalg.eigh(jy)
    mu = np.round(2 * mu) / 2.0  # eigenvalues are exactly -j..j
    return mu, v


def little_d(two_j: int, beta) -> np.ndarray:
    """Wigner small-d matrices, shape ``beta.shape + (d, d)``."""
    beta = np.asarray(beta, dtype=float)
    mu, v = _jy_eig(int(two_j))
    ph = np.exp(-1j * np.multiply.outer(beta, mu))  # (..., d)
    d = np.einsum("ik,...k,jk->...ij", v, ph, v.conj())
    return d.real.copy()


def wigner_from_euler(two_j: int, alpha, beta, gamma) -> np.ndarray:
    """Vectorized ``D^j`` from Euler angles, shape ``broadcast + (d, d)``."""
    alpha, beta, gamma = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (alpha, beta, gamma)))
    m = weights(two_j)
    left = np.exp(-1j * np.multiply.outer(alpha, m))
    right = np.exp(-1j * np.multiply.outer(gamma, m))
    return left[..., :, None] * little_d(two_j, beta) * right[..., None, :]


def wigner_matrices(two_j: int, u: np.ndarray) -> np.ndarray:
    """``D^j`` evaluated at an array of SU(2) matrices (shape ``(..., 2, 2)``)."""
    return wigner_from_euler(two_j, *matrix_euler(u))


def wigner_D(j, g: GroupPoint) -> np.ndarray:
    tj = two(j)
    if tj == 1:
        return np.array(g.u)
    return wigner_matrices(tj, g.u)


# ---------------------------------------------------------------- Lie algebra

def _spin_half_coords(X: np.ndarray) -> np.ndarray:
    """Coordinates c with X = sum_k c_k (-i J_k) in the spin-1/2 representation."""
    X = np.asarray(X, dtype=complex)
    if X.shape != (2, 2):
        raise ValueError("Lie algebra elements are 2x2 matrices")
    js = spin_matrices(1)
    # Tr(J_k J_l) = delta_kl / 2 for spin 1/2
    return np.array([2j * np.trace(X @ J) for J in js])


def drep(j, X: np.ndarray) -> np.ndarray:
    """Derived representation d xi(X) on spin ``j`` (complex-linear in X)."""
    return drep2(two(j), X)


def drep2(two_j: int, X: np.ndarray) -> np.ndarray:
    c = _spin_half_coords(X)
    js = spin_matrices(int(two_j))
    return -1j * sum(ck * J for ck, J in zip(c, js))


def lie_basis() -> list[np.ndarray]:
    """Orthonormal basis X_1, X_2, X_3 of su(2) for the scaled negative Killing form."""
    s = 1.0 / np.sqrt(2.0 * SETTINGS.metric_scale)
    return [-1j * s * np.array(J) for J in spin_matrices(1)]


def basis_drep(two_j: int) -> list[np.ndarray]:
    """``d xi(X_k)`` for the orthonormal basis, as a list of three matrices."""
    s = 1.0 / np.sqrt(2.0 * SETTINGS.metric_scale)
    return [-1j * s * np.array(J) for J in spin_matrices(int(two_j))]


def killing_gram() -> np.ndarray:
    """Gram matrix of the basis under ``-kappa * Tr(ad X_i ad X_j)``."""
    basis = lie_basis()

    def ad(X):
        cols = []
        for Y in basis:
            Z = X @ Y - Y @ X
            cols.append(_coords_in_basis(Z, basis))
        return np.array(cols).T

    ads = [ad(X) for X in basis]
    k = SETTINGS.metric_scale
    return np.array([[-k * np.trace(A @ B) for B in ads] for A in ads]).real


def _coords_in_basis(Z, basis):
    M = np.array([b.ravel() for b in basis]).T
    c, *_ = np.linalg.lstsq(M, Z.ravel(), rcond=None)
    return c


def casimir(two_j: int) -> np.ndarray:
    return sum(A @ A for A in basis_drep(two_j))


def laplace_eigenvalue(j) -> float:
    """lambda_j = j(j+1) / (2 kappa)."""
    return laplace_eigenvalue2(two(j))


def laplace_eigenvalue2(two_j) -> float | np.ndarray:
    tj = np.asarray(two_j, dtype=float)
    val = (tj / 2.0) * (tj / 2.0 + 1.0) / (2.0 * SETTINGS.metric_scale)
    return float(val) if val.ndim == 0 else val


def size(two_j):
    """|xi| = sqrt(lambda)."""
    return np.sqrt(laplace_eigenvalue2(two_j))


def bracket(two_j):
    """<xi> = sqrt(1 + lambda)."""
    return np.sqrt(1.0 + laplace_eigenvalue2(two_j))


def entry_derivative(j, X: np.ndarray, g: GroupPoint) -> np.ndarray:
    """Left-invariant derivative X D^j at g, i.e. D^j(g) d xi(X)."""
    tj = two(j)
    return wigner_D(j, g) @ drep2(tj, X)
