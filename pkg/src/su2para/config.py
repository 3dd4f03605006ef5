"""Global numerical settings shared by every module.

The metric scale ``kappa`` multiplies the negative Killing form of su(2).
With ``kappa = 1`` the Casimir eigenvalue on spin ``j`` is ``j(j+1)/2``.
Everything that depends on the metric (Lie algebra basis, Laplace
eigenvalues, geodesic distance) reads it from :data:`SETTINGS`.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass


@dataclass
class Settings:
    metric_scale: float = 1.0
    # tolerance on relative Plancherel mass that may be dropped silently
    truncation_tol: float = 1e-12
    # decay-fit protocol for symbol orders
    fit_window: tuple[float, float] = (4.0, 16.0)
    fit_tol: float = 0.3
    # log lattice used for dt/t integrals
    points_per_octave: int = 32


SETTINGS = Settings()


@contextmanager
def metric_scale(kappa: float):
    """Temporarily change the metric scale."""
    old = SETTINGS.metric_scale
    SETTINGS.metric_scale = float(kappa)
    try:
        yield
    finally:
        SETTINGS.metric_scale = old
