"""
Standardize, filter, spline and differentiate a window of raw readings.

The chain turns an hourly RawSeries into the dense standardized trajectory and
its backward-difference derivative that the regression library is built from.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline
from scipy.ndimage import correlate1d

from airsindy.core.dataset import RawSeries, TimeWindow, window_indices
from airsindy.core.errors import (
    MissingDataError,
    PreprocessError,
    TooFewPointsError,
    ZeroVarianceError,
)

DEFAULT_REFINEMENT = 100


@dataclass(frozen=True, eq=False)
class NormalizedSeries:
    values: np.ndarray
    mu: float
    sigma: float
    station: str
    species: str
    window: Optional[TimeWindow]
    dt_hours: float

    def destandardize(self, values=None):
        v = self.values if values is None else np.asarray(values, dtype=float)
        return v * self.sigma + self.mu


@dataclass(frozen=True, eq=False)
class ProcessedSeries:
    """Filtered and splined standardized series on the refined grid.

    ``dy[j]`` is the derivative on the interval ending at ``grid[j + 1]``.
    """
    grid: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    alpha: float
    normalized: NormalizedSeries
    refinement: int

    @property
    def species(self):
        return self.normalized.species

    @property
    def step(self):
        return self.normalized.dt_hours / self.refinement


def check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise PreprocessError(f"smoothing factor {alpha} is outside [0, 1]")
    return alpha


def standardize(s: RawSeries, w: Optional[TimeWindow] = None):
    """
    Returns (s - mu) / sigma over the window, with sample statistics.

    Args:
        s: raw series, already cut to the window when ``w`` is None.
        w: optional window to cut out of ``s`` first.

    Returns:
        NormalizedSeries keeping mu and sigma for de-standardization.
    """
    values = s.values
    t0 = s.t0
    if w is not None:
        lo, hi = window_indices(s, w)
        values = values[lo:hi]
        t0 = w.start
    gaps = np.flatnonzero(np.isnan(values))
    if gaps.size:
        raise MissingDataError(s.station, s.species, t0 + pd.Timedelta(hours=gaps[0] * s.dt_hours))
    if values.size < 2:
        raise TooFewPointsError(f"{s.station}/{s.species}: need at least 2 points to standardize, got {values.size}")

    mu = float(np.mean(values))
    sigma = float(np.std(values, ddof=1))
    if not sigma > 64 * np.finfo(float).eps * max(1.0, abs(mu)):
        raise ZeroVarianceError(f"{s.station}/{s.species} is constant over the window (sigma = {sigma:.3g})")
    return NormalizedSeries((values - mu) / sigma, mu, sigma, s.station, s.species, w, s.dt_hours)


def window_length(alpha, M):
    """Odd filter length for smoothing factor ``alpha`` on ``M`` points."""
    alpha = check_alpha(alpha)
    w = 1 + 2 * math.floor(alpha * (M - 1) / 4 + 0.5)
    cap = M if M % 2 == 1 else M - 1
    return max(1, min(w, cap))


def gaussian_kernel(w):
    """Normalized Gaussian weights of odd length ``w`` with standard deviation w/5."""
    if w < 1 or w % 2 == 0:
        raise PreprocessError(f"filter length must be a positive odd integer, got {w}")
    if w == 1:
        return np.ones(1)
    half = w // 2
    k = np.arange(-half, half + 1)
    weights = np.exp(-0.5 * (k / (w / 5.0)) ** 2)
    return weights / weights.sum()


def gaussian_filter(ns, alpha):
    """Gaussian-weighted moving average with reflection at both ends."""
    values = ns.values if isinstance(ns, NormalizedSeries) else np.asarray(ns, dtype=float)
    M = values.size
    if M < 3:
        raise TooFewPointsError(f"need at least 3 points to filter, got {M}")
    w = window_length(alpha, M)
    if w == 1:
        return values.copy()
    # 'mirror' reflects about the edge sample without repeating it
    return correlate1d(values, gaussian_kernel(w), mode='mirror')


def makima_slopes(x):
    """Modified-Akima knot slopes for unit-spaced knots ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise TooFewPointsError(f"need at least 2 knots for the spline, got {x.size}")
    delta = np.diff(x)
    n = delta.size
    # pad two secants on each side by replicating the nearest one
    d = np.concatenate([[delta[0], delta[0]], delta, [delta[-1], delta[-1]]])
    slopes = np.empty(n + 1)
    for i in range(n + 1):
        dm2, dm1, d0, d1 = d[i], d[i + 1], d[i + 2], d[i + 3]
        w1 = abs(d1 - d0) + abs(d1 + d0) / 2
        w2 = abs(dm1 - dm2) + abs(dm1 + dm2) / 2
        if w1 + w2 == 0:
            slopes[i] = (dm1 + d0) / 2
        else:
            slopes[i] = (w1 * dm1 + w2 * d0) / (w1 + w2)
    slopes[0] = delta[0]
    slopes[-1] = delta[-1]
    return slopes


def makima_spline(x, refinement=DEFAULT_REFINEMENT, dt_hours=1.0):
    """
    Evaluates the modified-Akima interpolant of hourly knots on a refined grid.

    Returns:
        (grid, y): grid in hours from the first knot and the interpolated values.
        Knot positions carry the knot values exactly.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise TooFewPointsError(f"need at least 2 knots for the spline, got {x.size}")
    if int(refinement) != refinement or refinement < 1:
        raise PreprocessError(f"refinement must be a positive integer, got {refinement}")
    refinement = int(refinement)

    knots = np.arange(x.size, dtype=float)
    spline = CubicHermiteSpline(knots, x, makima_slopes(x))
    u = np.arange((x.size - 1) * refinement + 1) / refinement
    y = spline(u)
    y[::refinement] = x
    return u * dt_hours, y


def differentiate(grid, y):
    """Backward differences (y[j] - y[j-1]) / dt for j >= 1, per hour."""
    grid = np.asarray(grid, dtype=float)
    y = np.asarray(y, dtype=float)
    if grid.size < 2 or grid.size != y.size:
        raise TooFewPointsError(f"need matching grid and values with at least 2 points, got {grid.size} and {y.size}")
    steps = np.diff(grid)
    dt = (grid[-1] - grid[0]) / (grid.size - 1)
    if not np.allclose(steps, dt, rtol=1e-9, atol=0):
        raise PreprocessError("differentiation grid is not uniform")
    return np.diff(y) / dt


def process_series(raw, alpha, refinement=DEFAULT_REFINEMENT, window=None):
    """Runs standardize -> gaussian_filter -> makima_spline -> differentiate."""
    alpha = check_alpha(alpha)
    ns = standardize(raw, window)
    filtered = gaussian_filter(ns, alpha)
    grid, y = makima_spline(filtered, refinement, ns.dt_hours)
    dy = differentiate(grid, y)
    logging.debug(
        f"Processed {ns.station}/{ns.species}: M={ns.values.size}, alpha={alpha}, "
        f"filter length {window_length(alpha, ns.values.size)}, {grid.size} refined points"
    )
    return ProcessedSeries(grid, y, dy, alpha, ns, refinement)
