"""Non-commutative Fourier analysis and para-differential calculus on SU(2)."""
from .config import SETTINGS, Settings, metric_scale

__all__ = ["SETTINGS", "Settings", "metric_scale"]
