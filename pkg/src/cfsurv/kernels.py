"""Gaussian kernels, median-heuristic bandwidths and Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .exceptions import AllPointsIdentical, DegenerateRange, DimensionMismatch, EmptyInput

__all__ = ["GaussianKernel", "median_heuristic", "gram", "time_grid", "as_points"]

# above this many points the median heuristic works on a seeded subsample
MEDIAN_SUBSAMPLE = 20_000


def as_points(points) -> np.ndarray:
    """Coerce scalars, 1-D sequences and 2-D arrays to an ``(n, d)`` array."""
    a = np.asarray(points, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise DimensionMismatch(f"points must be at most 2-D, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class GaussianKernel:
    """``k(y, y') = exp(-||y - y'||^2 / (2 * sigma2))``."""

    sigma2: float

    def __post_init__(self):
        s = float(self.sigma2)
        if not (np.isfinite(s) and s > 0):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2!r}")
        object.__setattr__(self, "sigma2", s)

    def __call__(self, rows, cols=None) -> np.ndarray:
        return gram(self, rows, rows if cols is None else cols)


def median_heuristic(points, seed: int = 0) -> float:
    """Median of pairwise squared distances (over ``i < j``) divided by two.

    For an even number of pairs the midpoint of the two central values is
    used. With more than ``MEDIAN_SUBSAMPLE`` points a uniform subsample of
    that size, drawn with ``seed``, is used instead.
    """
    x = as_points(points)
    if x.shape[0] < 2:
        raise EmptyInput("median heuristic needs at least two points")
    if x.shape[0] > MEDIAN_SUBSAMPLE:
        rng = np.random.default_rng(seed)
        x = x[rng.choice(x.shape[0], MEDIAN_SUBSAMPLE, replace=False)]
    d2 = pdist(x, "sqeuclidean")
    med = float(np.median(d2))
    if med == 0.0 and not np.any(d2 > 0):
        raise AllPointsIdentical("all points coincide; bandwidth would be zero")
    if med == 0.0:
        # over half the pairs coincide; fall back to the median of nonzero distances
        med = float(np.median(d2[d2 > 0]))
    return med / 2.0


def gram(kernel: GaussianKernel, rows, cols) -> np.ndarray:
    """Matrix with entries ``kernel(rows[i], cols[j])``."""
    a = as_points(rows)
    b = as_points(cols)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptyInput("gram needs non-empty point sets")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"row points have dimension {a.shape[1]}, columns {b.shape[1]}")
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * kernel.sigma2))


def time_grid(sample_times, n_points: int = 100) -> np.ndarray:
    """``n_points`` equally spaced values from ``min(sample_times)`` to the max."""
    t = np.asarray(sample_times, dtype=float).reshape(-1)
    if t.size == 0:
        raise EmptyInput("time grid needs at least one time")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    lo, hi = float(t.min()), float(t.max())
    if lo == hi:
        raise DegenerateRange(f"all times equal {lo}")
    return np.linspace(lo, hi, int(n_points))
