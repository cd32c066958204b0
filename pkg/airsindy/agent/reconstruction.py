"""Recovering an unmeasured species from a single measured one."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.stats import pearsonr

from airsindy.core.embedding import delay_embed, fit_orthogonal_correction, reconstruct, select_lag
from airsindy.core.errors import EmbeddingError


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    times: np.ndarray
    observed: np.ndarray
    reconstructed: np.ndarray
    tau: int
    lag: Optional[object]
    embedding: object
    correction: object
    actual: Optional[np.ndarray] = None
    correlation: Optional[float] = None

    def to_frame(self):
        frame = pd.DataFrame({
            't': self.times,
            'measured': self.observed,
            'reconstructed': self.reconstructed[:, 1],
        })
        if self.actual is not None:
            frame['actual'] = self.actual
        return frame


def reconstruct_hidden(measured, times=None, hidden=None, tau=None, tau_max=None, bins=None):
    """
    Embeds ``measured`` with a delay, corrects it over O(2) and returns the
    second coordinate as the hidden-species estimate.

    Args:
        measured: series on a uniform grid (usually the splined grid).
        times: grid times; defaults to sample indices.
        hidden: the true hidden series when available, for scoring.
        tau: fixed lag in grid steps; chosen by AMI when None.
        tau_max, bins: AMI search settings.
    """
    x = np.asarray(getattr(measured, 'y', measured), dtype=float)
    if times is None:
        times = getattr(measured, 'grid', np.arange(x.size, dtype=float))
    times = np.asarray(times, dtype=float)
    if times.size != x.size:
        raise EmbeddingError(f"{times.size} times given for {x.size} samples")

    lag = None
    if tau is None:
        lag = select_lag(x, tau_max, bins)
        tau = lag.tau
    emb = delay_embed(x, tau)
    n = len(emb)
    observed = x[:n]
    corr = fit_orthogonal_correction(emb, observed)
    corrected = reconstruct(emb, corr)

    actual = None
    correlation = None
    if hidden is not None:
        h = np.asarray(getattr(hidden, 'y', hidden), dtype=float)
        if h.size != x.size:
            raise EmbeddingError(f"hidden series has {h.size} samples, measured has {x.size}")
        actual = h[:n]
        correlation = float(pearsonr(corrected[:, 1], actual)[0])
        logging.info(f"Reconstruction correlation with the hidden series: {correlation:.4f}")
    return ReconstructionResult(times[:n], observed, corrected, tau, lag, emb, corr, actual, correlation)
