"""
Quadratic feature library and sparse regression.

Every subset of the five non-intercept monomials is fitted by least squares
and ranked by an information criterion. LASSO is kept as an alternative; it is
known to do poorly on real station data and is not the default.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from airsindy.core.errors import LassoConvergenceError, PreprocessError, RankDeficientError

FEATURE_LABELS = ('1', 'y1', 'y2', 'y1^2', 'y1*y2', 'y2^2')
N_TERMS = len(FEATURE_LABELS) - 1

RSS_FLOOR = 1e-12
RANK_TOL = 1e-10
LASSO_TOL = 1e-10
LASSO_MAX_SWEEPS = 200_000
THRESHOLD_SLACK = 1e-12


class Criterion(str, Enum):
    AIC = 'aic'
    BIC = 'bic'
    ADJ_R2 = 'adj_r2'


def quadratic_features(y1, y2):
    """Evaluates [1, y1, y2, y1^2, y1*y2, y2^2] row-wise."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    return np.column_stack([np.ones_like(y1), y1, y2, y1 * y1, y1 * y2, y2 * y2])


@dataclass(frozen=True, eq=False)
class FeatureLibrary:
    matrix: np.ndarray
    targets: tuple
    species: tuple = ('y1', 'y2')
    columns: tuple = FEATURE_LABELS

    def __post_init__(self):
        m, cols = self.matrix.shape
        if cols != len(self.columns):
            raise PreprocessError(f"library has {cols} columns, expected {len(self.columns)}")
        if m <= N_TERMS:
            raise PreprocessError(f"library has {m} rows; at least {N_TERMS + 1} are needed")
        if not np.all(self.matrix[:, 0] == 1.0):
            raise PreprocessError("first library column must be all ones")
        if not np.isfinite(self.matrix).all() or any(not np.isfinite(t).all() for t in self.targets):
            raise PreprocessError("library contains non-finite entries")
        if any(len(t) != m for t in self.targets):
            raise PreprocessError("targets are not aligned with library rows")

    @property
    def m(self):
        return self.matrix.shape[0]

    def target(self, species):
        return self.targets[self._index(species)]

    def _index(self, species):
        if isinstance(species, str):
            return self.species.index(species)
        return int(species)


def build_library(series: Sequence):
    """
    Builds the quadratic library from two processed series on a shared grid.

    Row j pairs the features at grid point j+1 with the backward difference
    ending there.
    """
    if len(series) != 2:
        raise PreprocessError(f"the quadratic library needs exactly 2 species, got {len(series)}")
    a, b = series
    if a.grid.shape != b.grid.shape or not np.allclose(a.grid, b.grid, rtol=0, atol=1e-12):
        raise PreprocessError(f"grids of {a.species} and {b.species} do not match")
    matrix = quadratic_features(a.y[1:], b.y[1:])
    return FeatureLibrary(matrix, (np.asarray(a.dy), np.asarray(b.dy)), (a.species, b.species))


def all_masks(n=N_TERMS):
    return [tuple(bits) for bits in itertools.product((False, True), repeat=n)]


def mask_label(mask):
    terms = [FEATURE_LABELS[i + 1] for i, on in enumerate(mask) if on]
    return '{' + ', '.join(terms) + '}'


def score(rss, tss, m, k):
    """Returns (aic, bic, adj_r2) for a fit with ``k`` non-intercept terms."""
    log_term = m * math.log(max(rss, RSS_FLOOR * m) / m)
    aic = log_term + 2 * k
    bic = log_term + math.log(m) * (k + 1)
    r2 = 1.0 if tss == 0 else 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * m / (m - k - 1) if m > k + 1 else math.nan
    return aic, bic, adj_r2


@dataclass(frozen=True, eq=False)
class RegressionFit:
    mask: tuple
    beta: np.ndarray
    rss: float
    tss: float
    m: int
    k: int
    aic: float
    bic: float
    adj_r2: float
    feasible: bool = True
    method: str = 'best_subset'

    def score(self, criterion):
        return getattr(self, Criterion(criterion).value)

    def sort_key(self, criterion):
        criterion = Criterion(criterion)
        value = -self.adj_r2 if criterion is Criterion.ADJ_R2 else self.score(criterion)
        return (not self.feasible, value, self.k, self.mask)

    def to_dict(self):
        return {
            'mask': [bool(b) for b in self.mask],
            'terms': mask_label(self.mask),
            'beta': [None if math.isnan(b) else float(b) for b in self.beta],
            'rss': self.rss,
            'k': self.k,
            'm': self.m,
            'aic': self.aic,
            'bic': self.bic,
            'adj_r2': self.adj_r2,
            'feasible': self.feasible,
            'method': self.method,
        }


def infeasible_fit(mask, m):
    return RegressionFit(
        mask=tuple(mask), beta=np.full(len(FEATURE_LABELS), np.nan), rss=math.inf, tss=math.nan,
        m=m, k=sum(mask), aic=math.inf, bic=math.inf, adj_r2=-math.inf, feasible=False,
    )


def _centered_tss(y):
    return float(np.sum((y - y.mean()) ** 2))


def fit_subset(lib, species, mask):
    """Least squares on the intercept plus the columns switched on in ``mask``."""
    mask = tuple(bool(b) for b in mask)
    if len(mask) != N_TERMS:
        raise PreprocessError(f"mask must have {N_TERMS} flags, got {len(mask)}")
    y = lib.target(species)
    m = lib.m
    k = sum(mask)
    if m <= k + 1:
        raise RankDeficientError(f"{m} rows cannot support {k + 1} coefficients with adjusted R^2")

    cols = [0] + [i + 1 for i, on in enumerate(mask) if on]
    A = lib.matrix[:, cols]
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min() <= RANK_TOL * diag.max():
        raise RankDeficientError(f"columns {mask_label(mask)} are linearly dependent")
    coef = solve_triangular(R, Q.T @ y)

    resid = y - A @ coef
    rss = float(resid @ resid)
    tss = _centered_tss(y)
    beta = np.zeros(len(FEATURE_LABELS))
    beta[cols] = coef
    aic, bic, adj_r2 = score(rss, tss, m, k)
    return RegressionFit(mask, beta, rss, tss, m, k, aic, bic, adj_r2)


@dataclass(frozen=True, eq=False)
class ModelRanking:
    fits: tuple
    criterion: Criterion
    species: str

    def __len__(self):
        return len(self.fits)

    def __getitem__(self, i):
        return self.fits[i]

    @property
    def best(self):
        return self.fits[0]

    def to_frame(self):
        rows = []
        for rank, fit in enumerate(self.fits, start=1):
            row = {'rank': rank, 'terms': mask_label(fit.mask), 'k': fit.k, 'feasible': fit.feasible}
            row.update({f'beta[{label}]': b for label, b in zip(FEATURE_LABELS, fit.beta)})
            row.update({'rss': fit.rss, 'aic': fit.aic, 'bic': fit.bic, 'adj_r2': fit.adj_r2})
            rows.append(row)
        return pd.DataFrame(rows)


def best_subset(lib, species, criterion=Criterion.AIC):
    """Fits all 2^n masks and ranks them; rank-deficient masks sort last."""
    criterion = Criterion(criterion)
    fits = []
    for mask in all_masks():
        try:
            fits.append(fit_subset(lib, species, mask))
        except RankDeficientError as e:
            logging.debug(f"Mask {mask_label(mask)} infeasible: {e}")
            fits.append(infeasible_fit(mask, lib.m))
    fits.sort(key=lambda f: f.sort_key(criterion))
    name = lib.species[lib._index(species)]
    best = fits[0]
    logging.info(f"Best subset for {name} by {criterion.value}: {mask_label(best.mask)} ({criterion.value}={best.score(criterion):.4f})")
    return ModelRanking(tuple(fits), criterion, name)


# --- LASSO ---

def _centered(lib, species):
    X = lib.matrix[:, 1:]
    y = lib.target(species)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    return X - x_mean, y - y_mean, x_mean, y_mean


def lambda_max(lib, species):
    """Smallest lambda at which every penalized coefficient is zero."""
    Xc, yc, _, _ = _centered(lib, species)
    # same per-column products as the coordinate update
    return float(max(abs(Xc[:, j] @ yc) for j in range(Xc.shape[1])))


def _coordinate_descent(Xc, yc, lam, beta, tol, max_sweeps):
    norms = np.einsum('ij,ij->j', Xc, Xc)
    resid = yc - Xc @ beta
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(beta.size):
            if norms[j] == 0.0:
                continue
            old = beta[j]
            rho = Xc[:, j] @ resid + norms[j] * old
            if abs(rho) <= lam * (1 + THRESHOLD_SLACK):
                new = 0.0
            else:
                new = np.sign(rho) * (abs(rho) - lam) / norms[j]
            if new != old:
                resid -= Xc[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            return beta, sweep + 1
    raise LassoConvergenceError(f"coordinate descent did not converge in {max_sweeps} sweeps at lambda={lam:g}")


def lasso(lib, species, lam, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS, warm_start=None):
    """
    Minimizes 0.5 * ||y - F beta||^2 + lam * ||beta[1:]||_1 by coordinate descent.

    The intercept is unpenalized and recovered from the column means.

    Returns:
        Coefficient vector in canonical column order, intercept first.
    """
    if not lam >= 0:
        raise PreprocessError(f"lambda must be nonnegative, got {lam}")
    Xc, yc, x_mean, y_mean = _centered(lib, species)
    beta = np.zeros(N_TERMS) if warm_start is None else np.array(warm_start[1:], dtype=float)
    beta, sweeps = _coordinate_descent(Xc, yc, float(lam), beta, tol, max_sweeps)
    logging.debug(f"LASSO converged in {sweeps} sweeps at lambda={lam:g}")
    return np.concatenate([[y_mean - x_mean @ beta], beta])


def lasso_path(lib, species, lambdas):
    """Warm-started sweep over decreasing lambdas. Returns (lambdas, betas)."""
    lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    betas = []
    beta = None
    for lam in lambdas:
        beta = lasso(lib, species, lam, warm_start=beta)
        betas.append(beta)
    return lambdas, np.array(betas)


def lasso_kkt_residual(lib, species, lam, beta):
    """Largest violation of the LASSO optimality conditions at ``beta``."""
    Xc, yc, _, _ = _centered(lib, species)
    b = np.asarray(beta, dtype=float)[1:]
    g = Xc.T @ (yc - Xc @ b)
    active = b != 0
    viol = np.where(active, np.abs(g - lam * np.sign(b)), np.maximum(np.abs(g) - lam, 0.0))
    return float(viol.max())


def lasso_fit(lib, species, lam):
    """Wraps a LASSO solution as a RegressionFit scored like the subset fits."""
    beta = lasso(lib, species, lam)
    y = lib.target(species)
    resid = y - lib.matrix @ beta
    rss = float(resid @ resid)
    mask = tuple(bool(b != 0) for b in beta[1:])
    k = sum(mask)
    aic, bic, adj_r2 = score(rss, _centered_tss(y), lib.m, k)
    return RegressionFit(mask, beta, rss, _centered_tss(y), lib.m, k, aic, bic, adj_r2, method='lasso')
