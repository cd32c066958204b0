"""
Smoothing-factor selection.

Each (station, alpha) cell runs the whole fit pipeline and scores the fitted
system against the standardized readings. The chosen alpha minimizes the worst
species-average RMSE across stations.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from airsindy import settings
from airsindy.core.dataset import TimeWindow, select_window
from airsindy.core.errors import AllModelsInfeasible, ConfigError, IntegrationError, SweepError
from airsindy.core.ode import IntegratorConfig, integrate, model_from_fits, select_feasible_model
from airsindy.core.preprocess import DEFAULT_REFINEMENT, process_series
from airsindy.core.regression import Criterion, best_subset, build_library, lasso_fit

DEFAULT_SPECIES = ('NO2', 'O3')
METHODS = ('best_subset', 'lasso')


def default_alpha_grid():
    """0.01, 0.05, 0.10, ..., 0.95, 0.99."""
    return tuple([0.01] + [round(0.05 * i, 2) for i in range(1, 20)] + [0.99])


@dataclass(frozen=True)
class AlphaGrid:
    values: tuple = field(default_factory=default_alpha_grid)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ConfigError("alpha grid is empty")
        if any(not 0 < v < 1 for v in values):
            raise ConfigError(f"alpha values must lie in (0, 1), got {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("alpha grid must be strictly increasing")
        object.__setattr__(self, 'values', values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    @classmethod
    def parse(cls, text):
        if text in (None, '', 'default'):
            return cls()
        try:
            return cls(tuple(float(v) for v in text.split(',')))
        except ValueError as e:
            raise ConfigError(f"invalid alpha grid {text!r}") from e


@dataclass(frozen=True)
class PipelineConfig:
    window: TimeWindow
    species: tuple = DEFAULT_SPECIES
    criterion: Criterion = Criterion.AIC
    method: str = 'best_subset'
    lam: float = 0.0
    refinement: int = DEFAULT_REFINEMENT
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    n_jobs: int = field(default_factory=lambda: settings.N_JOBS)

    def __post_init__(self):
        if len(self.species) != 2:
            raise ConfigError(f"exactly two species are required, got {self.species}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        object.__setattr__(self, 'criterion', Criterion(self.criterion))

    def to_dict(self):
        return {
            'window': [self.window.start.isoformat(), self.window.end.isoformat()],
            'species': list(self.species),
            'criterion': self.criterion.value,
            'method': self.method,
            'lambda': self.lam,
            'refinement': self.refinement,
            'rtol': self.integrator.rtol,
            'atol': self.integrator.atol,
            'epsilon': self.integrator.epsilon_guard,
            'max_steps': self.integrator.max_steps,
        }


@dataclass(frozen=True, eq=False)
class FitOutcome:
    station: str
    alpha: float
    model: Optional[object]
    rmse: dict
    status: str = 'ok'
    rankings: tuple = ()
    processed: tuple = ()
    trajectory: Optional[object] = None
    message: str = ''

    @property
    def ok(self):
        return self.status == 'ok'


def rmse(original, fitted):
    """sqrt(mean((original - fitted)^2)) over the M raw sample times."""
    w = np.asarray(getattr(original, 'values', original), dtype=float)
    y = np.asarray(fitted, dtype=float)
    if w.shape != y.shape or w.size == 0:
        raise SweepError(f"cannot compare series of lengths {w.size} and {y.size}")
    return float(np.sqrt(np.mean((w - y) ** 2)))


def station_fit(ds, station, w: TimeWindow, alpha, cfg: PipelineConfig):
    """
    Runs preprocess -> regression -> guarded integration for one station.

    Returns:
        FitOutcome with per-species RMSE, or status 'infeasible' when no ranked
        model pair integrates.
    """
    raws = select_window(ds, station, cfg.species, w)
    processed = tuple(process_series(raw, alpha, cfg.refinement) for raw in raws)
    lib = build_library(processed)
    y0 = np.array([p.y[0] for p in processed])
    t_span = (0.0, float(processed[0].grid[-1]))
    norm = tuple((p.normalized.mu, p.normalized.sigma) for p in processed)

    rankings = ()
    try:
        if cfg.method == 'lasso':
            fits = [lasso_fit(lib, i, cfg.lam) for i in range(2)]
            model = model_from_fits(fits, cfg.species, norm)
            traj = integrate(model, y0, t_span, cfg.integrator)
        else:
            rankings = tuple(best_subset(lib, i, cfg.criterion) for i in range(2))
            model, traj = select_feasible_model(rankings, y0, t_span, cfg.integrator, norm)
    except (AllModelsInfeasible, IntegrationError) as e:
        logging.warning(f"Station {station} at alpha={alpha}: infeasible ({e})")
        return FitOutcome(station, alpha, None, {sp: math.nan for sp in cfg.species}, 'infeasible',
                          rankings, processed, None, str(e))

    sampled = traj.sample(raws[0].hours())
    errors = {sp: rmse(p.normalized, sampled[:, i]) for i, (sp, p) in enumerate(zip(cfg.species, processed))}
    logging.info(f"Station {station} at alpha={alpha}: rmse {errors}")
    return FitOutcome(station, alpha, model, errors, 'ok', rankings, processed, traj)


@dataclass(frozen=True, eq=False)
class SweepReport:
    outcomes: tuple
    avg_rmse: pd.DataFrame
    argmin_alpha: float
    objective: float
    excluded: tuple = ()

    def to_frame(self):
        rows = []
        for o in self.outcomes:
            for sp, value in o.rmse.items():
                rows.append({'station': o.station, 'alpha': o.alpha, 'species': sp, 'rmse': value, 'status': o.status})
        return pd.DataFrame(rows, columns=['station', 'alpha', 'species', 'rmse', 'status'])

    def worst_average(self):
        return self.avg_rmse.max(axis=0, skipna=False)

    def summary(self):
        return {
            'alpha_star': self.argmin_alpha,
            'objective': self.objective,
            'avg_rmse': {sp: {repr(a): (None if math.isnan(v) else v) for a, v in row.items()}
                         for sp, row in self.avg_rmse.iterrows()},
            'excluded': [{'species': sp, 'alpha': a} for sp, a in self.excluded],
        }


def summarize_outcomes(outcomes: Sequence[FitOutcome], species, grid):
    """Averages ok outcomes per (species, alpha) and solves the min-max problem."""
    rows = [
        {'species': sp, 'alpha': o.alpha, 'rmse': o.rmse[sp]}
        for o in outcomes if o.ok for sp in species
    ]
    if not rows:
        raise SweepError("no station produced a feasible fit at any alpha")
    frame = pd.DataFrame(rows, columns=['species', 'alpha', 'rmse'])
    table = frame.groupby(['species', 'alpha'])['rmse'].mean().unstack('alpha')
    table = table.reindex(index=list(species), columns=list(grid))

    excluded = tuple((sp, a) for sp in species for a in grid if math.isnan(table.loc[sp, a]))
    for sp, a in excluded:
        logging.warning(f"No feasible station fits for {sp} at alpha={a}; cell excluded")

    best_alpha, best_value = None, math.inf
    for a in grid:
        column = table[a]
        if column.isna().any():
            continue
        worst = float(column.max())
        if worst < best_value:
            best_alpha, best_value = a, worst
    if best_alpha is None:
        raise SweepError("every alpha has a species without feasible fits")
    logging.info(f"Selected alpha*={best_alpha} with worst average RMSE {best_value:.4f}")
    return SweepReport(tuple(outcomes), table, best_alpha, best_value, excluded)


def minmax_alpha(ds, stations, w: TimeWindow, grid: AlphaGrid, cfg: PipelineConfig):
    """Fits every (station, alpha) cell and returns the min-max alpha."""
    stations = list(stations)
    if not stations:
        raise SweepError("no stations to sweep")
    cells = [(st, a) for st in stations for a in grid]
    logging.info(f"Sweeping {len(stations)} stations x {len(grid)} alphas with n_jobs={cfg.n_jobs}")
    outcomes = Parallel(n_jobs=cfg.n_jobs)(delayed(station_fit)(ds, st, w, a, cfg) for st, a in cells)
    return summarize_outcomes(outcomes, cfg.species, tuple(grid))
