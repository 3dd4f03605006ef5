"""Littlewood-Paley windows, spectral multipliers and LP-based norms.

The low-pass window ``phi`` equals 1 on ``[0, 1/2]`` and vanishes beyond 1;
the transition is the classical ``exp(-1/x)`` smooth step.  The band-pass
window is ``psi(lam) = -lam phi'(lam)``, so that for every ``T``

    phi(lam) + int_1^T psi(lam / t) dt / t = phi(lam / T).

All ``dt/t`` integrals use :func:`t_lattice`: composite Gauss-Legendre in
``log t`` whose panel edges include the octave points and every window
breakpoint ``t = c * |xi|`` of the spectrum in use, so each panel sees an
analytic integrand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SETTINGS
from .fourier import (GridFunction, SpectralFunction, inverse, inverse_values, packed_spins,
                      plancherel_weights, sobolev_norm)
from .group import QuadratureGrid, distance_matrix_arrays, haar_grid, grid_for_total
from .irreps import bracket, size


class WindowError(RuntimeError):
    pass


def _s(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = x > 0
    out[m] = np.exp(-1.0 / x[m])
    return out


def _ds(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = x > 0
    out[m] = np.exp(-1.0 / x[m]) / x[m] ** 2
    return out


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    a, b = _s(u), _s(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def smooth_step_derivative(u):
    u = np.asarray(u, dtype=float)
    a, b = _s(u), _s(1.0 - u)
    da, db = _ds(u), _ds(1.0 - u)
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class WindowPair:
    """Low-pass / band-pass pair built from the smooth step."""

    inner: float = 0.5
    outer: float = 1.0

    def _u(self, lam):
        return (self.outer - np.abs(np.asarray(lam, dtype=float))) / (self.outer - self.inner)

    def phi(self, lam):
        return smooth_step(self._u(lam))

    def dphi(self, lam):
        lam = np.asarray(lam, dtype=float)
        return -np.sign(lam) * smooth_step_derivative(self._u(lam)) / (self.outer - self.inner)

    def psi(self, lam):
        lam = np.asarray(lam, dtype=float)
        return -lam * self.dphi(lam)

    def theta(self, lam):
        """Dyadic window phi(lam/2) - phi(lam)."""
        return self.phi(np.asarray(lam) / 2.0) - self.phi(lam)

    def theta_k(self, lam, k: int):
        return self.phi(np.asarray(lam) / 2.0 ** (k + 1)) - self.phi(np.asarray(lam) / 2.0 ** k)

    def breakpoints(self) -> tuple[float, float]:
        return (self.inner, self.outer)

    def partition_residual(self, lams, t_max: float | None = None) -> float:
        """max |phi(lam) + int_1^T psi(lam/t) dt/t - phi(lam/T)| with T past the support."""
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        T = t_max or 2.0 * max(1.0, lams.max()) / self.inner
        t, w = t_lattice(lams, T, scales=(1.0 / self.outer, 1.0 / self.inner))
        integ = self.psi(lams[:, None] / t[None, :]) @ w
        return float(np.abs(self.phi(lams) + integ - self.phi(lams / T)).max())


def make_windows(inner: float = 0.5, outer: float = 1.0, check: bool = True) -> WindowPair:
    """Window pair with a partition-of-unity self-test on a 32-per-octave log lattice."""
    if not 0 < inner < outer:
        raise WindowError("need 0 < inner < outer")
    w = WindowPair(inner, outer)
    if check:
        lams = np.exp(np.arange(0, 8 * 32 + 1) * np.log(2) / 32)  # lam in [1, 256]
        res = w.partition_residual(lams)
        if res > 1e-8:
            raise WindowError(f"partition identity residual {res:.2e} exceeds 1e-8")
    return w


WINDOWS = WindowPair()


# ---------------------------------------------------------------- t quadrature

def t_lattice(values, t_max: float, t_min: float = 1.0, scales=(1.0, 2.0),
              nodes: int | None = None):
    """Nodes and weights for int_{t_min}^{t_max} g(t) dt/t.

    Panels are delimited by octave points and by ``c * v`` for every value
    ``v`` in ``values`` and ``c`` in ``scales``; each panel carries
    ``nodes`` Gauss-Legendre points in ``log t`` (default 32).
    """
    nodes = nodes or SETTINGS.points_per_octave
    vals = np.atleast_1d(np.asarray(values, dtype=float))
    br = [t_min, t_max]
    n_oct = int(np.ceil(np.log2(t_max / t_min) - 1e-12))
    br += list(t_min * 2.0 ** np.arange(1, n_oct))
    for c in scales:
        br += list(c * vals)
    br = np.unique(np.round(np.asarray(br), 14))
    br = br[(br >= t_min) & (br <= t_max)]
    u = np.log(br)
    x, w = np.polynomial.legendre.leggauss(nodes)
    u0, u1 = u[:-1], u[1:]
    keep = (u1 - u0) > 1e-13
    u0, u1 = u0[keep], u1[keep]
    uu = ((x[None, :] + 1) / 2 * (u1 - u0)[:, None] + u0[:, None]).ravel()
    ww = (w[None, :] / 2 * (u1 - u0)[:, None]).ravel()
    return np.exp(uu), ww


def spectrum_sizes(two_b: int) -> np.ndarray:
    return size(np.arange(two_b + 1))


# ---------------------------------------------------------------- multipliers

def multiplier_coeffs(coeffs: np.ndarray, two_b: int, values_per_spin: np.ndarray) -> np.ndarray:
    return coeffs * np.asarray(values_per_spin)[packed_spins(two_b)]


def multiplier_apply(h, t: float, f: SpectralFunction) -> SpectralFunction:
    """Scale the block of spin j by h(|xi_j| / t)."""
    vals = np.asarray(h(spectrum_sizes(f.two_b) / t), dtype=complex) * np.ones(f.two_b + 1)
    return SpectralFunction(f.two_b, multiplier_coeffs(f.coeffs, f.two_b, vals))


def lp_block(t: float, f: SpectralFunction, windows: WindowPair = WINDOWS) -> SpectralFunction:
    """psi_t(|grad|) f, supported in S[t/2, t]."""
    return multiplier_apply(windows.psi, t, f)


def low_pass(t: float, f: SpectralFunction, windows: WindowPair = WINDOWS) -> SpectralFunction:
    return multiplier_apply(windows.phi, t, f)


def continuous_reconstruction(f: SpectralFunction, T: float | None = None,
                              windows: WindowPair = WINDOWS):
    """phi(|grad|) f + int_1^T psi_t f dt/t by quadrature; returns (result, residual vs phi_T f)."""
    lam = spectrum_sizes(f.two_b)
    T = T or max(2.0, 2.0 * lam.max() / windows.inner)
    t, w = t_lattice(lam, T, scales=(1.0 / windows.outer, 1.0 / windows.inner))
    per_spin = windows.phi(lam) + windows.psi(lam[:, None] / t[None, :]) @ w
    out = SpectralFunction(f.two_b, multiplier_coeffs(f.coeffs, f.two_b, per_spin))
    target = low_pass(T, f, windows)
    res = sobolev_norm(out - target) / max(sobolev_norm(f), 1e-300)
    return out, res


def n_dyadic(two_b: int, windows: WindowPair = WINDOWS) -> int:
    """Number of dyadic blocks needed so that phi(|xi|/2^K) = 1 on the band."""
    lmax = spectrum_sizes(two_b).max()
    k = 0
    while lmax / 2.0 ** k > windows.inner:
        k += 1
    return k


def dyadic_blocks(f: SpectralFunction, windows: WindowPair = WINDOWS) -> list[SpectralFunction]:
    """[phi f, theta_0 f, theta_1 f, ...] covering the whole band."""
    lam = spectrum_sizes(f.two_b)
    blocks = [multiplier_apply(windows.phi, 1.0, f)]
    for k in range(n_dyadic(f.two_b, windows)):
        vals = windows.theta_k(lam, k)
        blocks.append(SpectralFunction(f.two_b, multiplier_coeffs(f.coeffs, f.two_b, vals)))
    return blocks


def dyadic_reconstruction_residual(f: SpectralFunction, windows: WindowPair = WINDOWS) -> float:
    total = SpectralFunction.zeros(f.two_b)
    for b in dyadic_blocks(f, windows):
        total = total + b
    return float(np.abs(total.coeffs - f.coeffs).max() / max(np.abs(f.coeffs).max(), 1e-300))


def square_function(f: SpectralFunction, s: float, windows: WindowPair = WINDOWS) -> float:
    """(||phi f||^2 + sum_k 2^{2ks} ||theta_k f||^2)^{1/2}."""
    blocks = dyadic_blocks(f, windows)
    tot = sobolev_norm(blocks[0]) ** 2
    for k, b in enumerate(blocks[1:]):
        tot += 2.0 ** (2 * k * s) * sobolev_norm(b) ** 2
    return float(np.sqrt(tot))


def square_function_bracket(two_b: int, s: float, windows: WindowPair = WINDOWS):
    """Extreme per-spin ratios square_function / H^s norm (bounds every f on the band)."""
    lam = spectrum_sizes(two_b)
    tot = windows.phi(lam) ** 2
    for k in range(n_dyadic(two_b, windows)):
        tot = tot + 2.0 ** (2 * k * s) * windows.theta_k(lam, k) ** 2
    ratio = np.sqrt(tot) / bracket(np.arange(two_b + 1)) ** s
    return float(ratio.min()), float(ratio.max())


# ---------------------------------------------------------------- kernels and norms

def kernel_profile(h, t: float, grid: QuadratureGrid, two_b: int | None = None, r: float = 1.0):
    """Convolution kernel of h(|grad|/t) on the grid plus L^1 diagnostics."""
    tb = grid.two_b if two_b is None else two_b
    lam = spectrum_sizes(tb)
    blocks = {tj: np.asarray(h(lam[tj] / t)) * np.eye(tj + 1) for tj in range(tb + 1)}
    k = inverse(SpectralFunction.from_blocks(blocks, tb), grid)
    dist = distance_matrix_arrays(np.eye(2), grid.matrices).reshape(grid.shape)
    absk = np.abs(k.values)
    diag = {"t": t, "L1": float(grid.integrate(absk)),
            "L1_dist": float(grid.integrate(absk * dist ** r)),
            "L1_dist_scaled": float(grid.integrate(absk * dist ** r)) * t ** r}
    return k, diag


def bernstein_check(f: SpectralFunction, s: float, t: float) -> float:
    """||f||_{H^s} / (t^s ||f||_{L^2})."""
    return sobolev_norm(f, s) / (t ** s * sobolev_norm(f, 0.0))


def sup_norm(f: SpectralFunction, grid: QuadratureGrid | None = None) -> float:
    """Grid maximum of |f| (an estimator of the sup norm)."""
    grid = grid or sup_grid(f.two_b)
    return float(np.abs(inverse_values(grid, f.coeffs, f.two_b)).max())


def sup_grid(two_b: int) -> QuadratureGrid:
    """Oversampled grid used for sup-norm estimates."""
    return grid_for_total(max(4, 4 * two_b))


def zygmund_norm(f: SpectralFunction, r: float, per_octave: int = 8,
                 grid: QuadratureGrid | None = None, windows: WindowPair = WINDOWS) -> float:
    """sup|phi f| + sup_t t^r |psi_t f|_inf over a log lattice of t."""
    grid = grid or sup_grid(f.two_b)
    lam = spectrum_sizes(f.two_b)
    t_hi = max(2.0, lam.max() / windows.inner)
    ts = np.exp(np.linspace(0, np.log(t_hi), max(2, int(np.ceil(np.log2(t_hi) * per_octave)) + 1)))
    low = sup_norm(low_pass(1.0, f, windows), grid)
    vals = np.stack([windows.psi(lam / t) for t in ts])          # (nt, spins)
    coeffs = f.coeffs[None, :] * vals[:, packed_spins(f.two_b)]
    sup = np.abs(inverse_values(grid, coeffs, f.two_b)).reshape(len(ts), -1).max(axis=1)
    return float(low + np.max(ts ** r * sup))


def lp_table(f: SpectralFunction, s: float, ts=None, grid=None, windows: WindowPair = WINDOWS):
    """Rows (t, L2, Linf, Hs) of the LP blocks psi_t f."""
    lam = spectrum_sizes(f.two_b)
    if ts is None:
        t_hi = max(2.0, lam.max() / windows.inner)
        ts = 2.0 ** np.arange(0, np.ceil(np.log2(t_hi)) + 1)
    grid = grid or sup_grid(f.two_b)
    rows = []
    for t in ts:
        b = lp_block(t, f, windows)
        rows.append({"t": float(t), "L2": sobolev_norm(b, 0.0), "Linf": sup_norm(b, grid),
                     "Hs": sobolev_norm(b, s)})
    return rows


# ---------------------------------------------------------------- test functions

def shell_spins(k: int, two_b: int) -> np.ndarray:
    """Spins (doubled) with 2^{k-1} < |xi| <= 2^k (k = -1 means the constants)."""
    tj = np.arange(two_b + 1)
    lam = size(tj)
    if k < 0:
        return tj[lam == 0]
    return tj[(lam > 2.0 ** (k - 1)) & (lam <= 2.0 ** k)]


def zygmund_witness(r: float, two_b: int, rng: np.random.Generator, real: bool = True,
                    grid: QuadratureGrid | None = None) -> SpectralFunction:
    """Finite LP series sum_k 2^{-kr} g_k with |g_k|_inf = 1 and g_k in the k-th dyadic shell.

    Its C^r_* norm is bounded independently of the band by construction.
    """
    from .fourier import random_spectral, packed_size
    grid = grid or sup_grid(two_b)
    total = np.zeros(packed_size(two_b), dtype=complex)
    k = -1
    while True:
        spins = shell_spins(k, two_b)
        if k >= 0 and size(two_b) < 2.0 ** (k - 1):
            break
        if len(spins):
            g = random_spectral(two_b, rng, real=real)
            mask = np.isin(packed_spins(two_b), spins)
            c = np.where(mask, g.coeffs, 0.0)
            nrm = np.abs(inverse_values(grid, c, two_b)).max()
            total += (2.0 ** (-max(k, 0) * r)) * c / nrm
        k += 1
    return SpectralFunction(two_b, total)
