"""
Delay embedding of a single measured species.

The lag comes from the first minimum of the average mutual information that
stands out from histogram jitter. The 2-D embedding is then corrected by the
element of O(2) that best maps its first coordinate back onto the observed
series.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks
from sklearn.metrics import mutual_info_score

from airsindy.core.errors import CorrectionError, EmbeddingError

THETA_GRID = 3600
# a minimum must stand out by this fraction of the AMI range
MIN_PROMINENCE = 0.1
THETA_XTOL = 1e-10
IDENTITY_TOL = 1e-6
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def default_bins(m):
    return max(8, math.ceil(math.log2(m)) + 1)


def _lag_pairs(series, tau):
    x = np.asarray(series, dtype=float)
    if not 1 <= tau < x.size:
        raise EmbeddingError(f"lag {tau} is out of range for a series of length {x.size}")
    return x[:-tau], x[tau:]


def ami(series, tau, bins=None):
    """Average mutual information (nats) between the series and its tau-lagged copy."""
    x = np.asarray(series, dtype=float)
    head, tail = _lag_pairs(x, tau)
    bins = default_bins(x.size) if bins is None else int(bins)
    if bins < 2:
        raise EmbeddingError(f"need at least 2 bins, got {bins}")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return 0.0
    counts, _, _ = np.histogram2d(head, tail, bins=bins, range=[[lo, hi], [lo, hi]])
    return float(mutual_info_score(None, None, contingency=counts.astype(np.int64)))


@dataclass(frozen=True, eq=False)
class AMICurve:
    lags: np.ndarray
    ami: np.ndarray
    bins: int


@dataclass(frozen=True, eq=False)
class LagSelection:
    tau: int
    curve: AMICurve
    fallback: bool = False


def ami_curve(series, tau_max=None, bins=None):
    x = np.asarray(series, dtype=float)
    tau_max = x.size // 4 if tau_max is None else int(tau_max)
    if not 1 <= tau_max < x.size:
        raise EmbeddingError(f"tau_max {tau_max} is out of range for a series of length {x.size}")
    bins = default_bins(x.size) if bins is None else int(bins)
    lags = np.arange(1, tau_max + 1)
    return AMICurve(lags, np.array([ami(x, int(t), bins) for t in lags]), bins)


def first_local_minimum(values, min_prominence=MIN_PROMINENCE):
    """
    Index of the first interior local minimum whose prominence is at least
    ``min_prominence`` times the range of ``values``, or None.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return None
    span = float(v.max() - v.min())
    if span <= 0:
        return None
    idx, _ = find_peaks(-v, prominence=min_prominence * span)
    return int(idx[0]) if idx.size else None


def select_lag(series, tau_max=None, bins=None):
    curve = ami_curve(series, tau_max, bins)
    i = first_local_minimum(curve.ami)
    if i is None:
        i = int(np.argmin(curve.ami))
        logging.warning(f"AMI has no prominent interior minimum up to tau={curve.lags[-1]}; using argmin tau={curve.lags[i]}")
        return LagSelection(int(curve.lags[i]), curve, fallback=True)
    logging.info(f"Selected delay tau={curve.lags[i]} (AMI {curve.ami[i]:.4f} nats)")
    return LagSelection(int(curve.lags[i]), curve)


@dataclass(frozen=True, eq=False)
class DelayEmbedding:
    tau: int
    points: np.ndarray
    d: int = 2

    def __len__(self):
        return self.points.shape[0]


def delay_embed(series, tau, d=2):
    """Point j is (x[j], x[j + tau]); m - tau points in total."""
    if d != 2:
        raise EmbeddingError(f"only 2-dimensional embeddings are supported, got d={d}")
    head, tail = _lag_pairs(series, int(tau))
    return DelayEmbedding(int(tau), np.column_stack([head, tail]), d)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def correction_matrix(theta, reflected):
    R = rotation(theta)
    return SWAP @ R if reflected else R


@dataclass(frozen=True)
class Candidate:
    theta: float
    reflected: bool
    loss: float


@dataclass(frozen=True, eq=False)
class OrthogonalCorrection:
    theta: float
    reflected: bool
    matrix: np.ndarray
    loss: float
    candidates: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            'theta': self.theta,
            'reflected': self.reflected,
            'matrix': self.matrix.tolist(),
            'loss': self.loss,
            'candidates': [{'theta': c.theta, 'reflected': c.reflected, 'loss': c.loss} for c in self.candidates],
        }


def _first_row(theta, reflected):
    if reflected:
        return -np.sin(theta), np.cos(theta)
    return np.cos(theta), np.sin(theta)


def _loss(points, observed, theta, reflected):
    a, b = _first_row(theta, reflected)
    r = a * points[:, 0] + b * points[:, 1] - observed
    return float(r @ r)


def fit_orthogonal_correction(emb, observed, grid_size=THETA_GRID):
    """
    Finds A in O(2) minimizing sum |(A y_hat(t))_1 - y(t)|^2, excluding A = I.

    Both branches R(theta) and SWAP @ R(theta) are scanned on a uniform theta
    grid; every local minimum is refined with a bounded scalar search.
    """
    points = np.asarray(emb.points, dtype=float)
    y = np.asarray(observed, dtype=float)
    if y.shape[0] != points.shape[0]:
        raise CorrectionError(f"observed series has {y.shape[0]} points, embedding has {points.shape[0]}")
    x, z = points[:, 0], points[:, 1]
    sxx, szz, sxz = x @ x, z @ z, x @ z
    sxy, szy, syy = x @ y, z @ y, y @ y

    thetas = np.arange(grid_size) * (2 * math.pi / grid_size)
    step = 2 * math.pi / grid_size
    candidates = []
    for reflected in (False, True):
        a, b = _first_row(thetas, reflected)
        grid_loss = a * a * sxx + b * b * szz + 2 * a * b * sxz - 2 * a * sxy - 2 * b * szy + syy
        prev, nxt = np.roll(grid_loss, 1), np.roll(grid_loss, -1)
        for i in np.flatnonzero((grid_loss <= prev) & (grid_loss < nxt)):
            res = minimize_scalar(
                lambda t: _loss(points, y, t, reflected),
                bounds=(thetas[i] - step, thetas[i] + step),
                method='bounded',
                options={'xatol': THETA_XTOL},
            )
            theta = float(res.x) % (2 * math.pi)
            if not reflected and np.linalg.norm(rotation(theta) - np.eye(2)) < IDENTITY_TOL:
                continue
            candidates.append(Candidate(theta, reflected, _loss(points, y, theta, reflected)))

    if not candidates:
        raise CorrectionError("no non-identity local minimum of the correction loss was found")
    best = min(c.loss for c in candidates)
    tie = 1e-12 * max(1.0, syy)
    chosen = min((c for c in candidates if c.loss <= best + tie), key=lambda c: (c.reflected, c.theta))
    candidates.sort(key=lambda c: (c.loss, c.reflected, c.theta))
    logging.info(
        f"O(2) correction: theta={chosen.theta:.6f}, reflected={chosen.reflected}, loss={chosen.loss:.4g} "
        f"({len(candidates)} local minima)"
    )
    return OrthogonalCorrection(
        chosen.theta, chosen.reflected, correction_matrix(chosen.theta, chosen.reflected), chosen.loss, tuple(candidates)
    )


def reconstruct(emb, corr):
    """Applies the correction pointwise; column 1 estimates the hidden species."""
    return np.asarray(emb.points) @ corr.matrix.T
