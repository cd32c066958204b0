"""
Fitted support against window length.

One station is fitted over windows that share a start and grow in length.
Each row of the result records how many library terms the selected model
keeps for one species.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import pandas as pd
from joblib import Parallel, delayed

from airsindy.agent.sweep import PipelineConfig, station_fit
from airsindy.core.dataset import TimeWindow, to_utc
from airsindy.core.errors import ConfigError
from airsindy.core.regression import mask_label

COLUMNS = ['hours', 'species', 'status', 'k', 'terms', 'rank', 'rmse']


def check_lengths(lengths):
    lengths = tuple(float(h) for h in lengths)
    if not lengths:
        raise ConfigError("no window lengths given")
    if any(not h > 0 for h in lengths):
        raise ConfigError(f"window lengths must be positive, got {lengths}")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ConfigError("window lengths must be strictly increasing")
    return lengths


def parse_lengths(text):
    """'5,8,11' -> (5.0, 8.0, 11.0)."""
    try:
        values = [float(v) for v in str(text).split(',')]
    except ValueError as e:
        raise ConfigError(f"invalid window lengths {text!r}") from e
    return check_lengths(values)


@dataclass(frozen=True, eq=False)
class SparsityReport:
    station: str
    alpha: float
    outcomes: tuple
    table: pd.DataFrame

    def k_by_length(self):
        """hours x species table of selected term counts."""
        return self.table.pivot(index='hours', columns='species', values='k')

    def summary(self):
        return {
            'station': self.station,
            'alpha': self.alpha,
            'rows': [
                {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
                for row in self.table.to_dict(orient='records')
            ],
        }


def _rows(hours, outcome, species):
    if not outcome.ok:
        return [
            {'hours': hours, 'species': sp, 'status': outcome.status, 'k': math.nan, 'terms': '', 'rank': math.nan,
             'rmse': math.nan}
            for sp in species
        ]
    model = outcome.model
    ranks = model.ranks or (math.nan,) * len(species)
    return [
        {'hours': hours, 'species': sp, 'status': 'ok', 'k': int(sum(mask)), 'terms': mask_label(mask),
         'rank': rank, 'rmse': outcome.rmse[sp]}
        for sp, mask, rank in zip(species, model.masks, ranks)
    ]


def window_sparsity(ds, station, start, lengths: Sequence[float], alpha, cfg: PipelineConfig):
    """
    Fits ``station`` at ``alpha`` over [start, start + h] for each h in ``lengths``.

    Returns:
        SparsityReport whose table has one row per (length, species).
    """
    lengths = check_lengths(lengths)
    start = to_utc(start)
    windows = [TimeWindow(start, start + pd.Timedelta(hours=h)) for h in lengths]
    logging.info(f"Fitting {station} over {len(windows)} window lengths {list(lengths)} h at alpha={alpha}")
    outcomes = Parallel(n_jobs=cfg.n_jobs)(delayed(station_fit)(ds, station, w, alpha, cfg) for w in windows)

    rows = [row for h, o in zip(lengths, outcomes) for row in _rows(h, o, cfg.species)]
    table = pd.DataFrame(rows, columns=COLUMNS)
    for h, o in zip(lengths, outcomes):
        if o.ok:
            logging.info(f"{h:g} h window: {[mask_label(m) for m in o.model.masks]}")
        else:
            logging.warning(f"{h:g} h window: {o.status} ({o.message})")
    return SparsityReport(station, float(alpha), tuple(outcomes), table)
