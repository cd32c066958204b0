"""
Planar quadratic systems and a stiff integrator for them.

The integrator is a two-stage, L-stable, stiffly accurate SDIRK method with
simplified Newton iterations. Local error is estimated by step doubling, and
every accepted node is checked against the derivative guard. It only needs
``rhs(t, y)`` and ``jac(t, y)``, so the kinetics oracle in ``synth`` uses it
too.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import lu_factor, lu_solve

from airsindy import settings
from airsindy.core.errors import (
    AllModelsInfeasible,
    ConfigError,
    DerivativeBlowup,
    IntegrationError,
    NewtonDivergence,
    StepLimitExceeded,
)
from airsindy.core.regression import FEATURE_LABELS, mask_label

GAMMA = 1.0 - 1.0 / math.sqrt(2.0)
NEWTON_MAX_ITER = 8
NEWTON_TOL = 1e-2
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-6
    atol: float = 1e-9
    epsilon_guard: float = field(default_factory=lambda: settings.EPSILON_GUARD)
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError(f"tolerances must be positive (rtol={self.rtol}, atol={self.atol})")
        if not self.epsilon_guard > 0:
            raise ConfigError(f"derivative guard must be positive, got {self.epsilon_guard}")
        if int(self.max_steps) < 1:
            raise ConfigError(f"max_steps must be at least 1, got {self.max_steps}")


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """
    Fitted system dy_i/dt = sum_j coeffs[i, j] * feature_j(y1, y2).

    ``norm_params`` holds the (mu, sigma) of each species when the model lives
    in standardized coordinates.
    """
    coeffs: np.ndarray
    species: tuple = ('y1', 'y2')
    norm_params: Optional[tuple] = None
    ranks: Optional[tuple] = None
    masks: Optional[tuple] = None

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (2, len(FEATURE_LABELS)):
            raise ConfigError(f"quadratic model needs a 2x{len(FEATURE_LABELS)} coefficient matrix, got {coeffs.shape}")
        if not np.isfinite(coeffs).all():
            raise ConfigError("model coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        object.__setattr__(self, 'species', tuple(self.species))
        if self.norm_params is not None:
            object.__setattr__(self, 'norm_params', tuple((float(mu), float(sig)) for mu, sig in self.norm_params))

    def rhs(self, t, y):
        return evaluate_rhs(self, y)

    def jac(self, t, y):
        return evaluate_jacobian(self, y)

    def equations(self, precision=4):
        """Human-readable right-hand sides."""
        lines = []
        for name, row in zip(self.species, self.coeffs):
            terms = [
                f"{b:+.{precision}f}" + ('' if label == '1' else f"*{label}")
                for label, b in zip(FEATURE_LABELS, row) if b != 0
            ]
            lines.append(f"d{name}/dt = " + (' '.join(terms) if terms else '0'))
        return lines

    def to_dict(self):
        out = {
            'species': list(self.species),
            'columns': list(FEATURE_LABELS),
            'coefficients': self.coeffs.tolist(),
        }
        if self.norm_params is not None:
            out['normalization'] = {sp: {'mu': mu, 'sigma': sig} for sp, (mu, sig) in zip(self.species, self.norm_params)}
        if self.ranks is not None:
            out['ranks'] = list(self.ranks)
        if self.masks is not None:
            out['terms'] = [mask_label(m) for m in self.masks]
        return out

    @classmethod
    def from_dict(cls, data):
        try:
            species = tuple(data.get('species', ('y1', 'y2')))
            norm = data.get('normalization')
            norm_params = None if norm is None else tuple((norm[sp]['mu'], norm[sp]['sigma']) for sp in species)
            ranks = tuple(data['ranks']) if 'ranks' in data else None
            return cls(np.array(data['coefficients'], dtype=float), species, norm_params, ranks)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid model description: {e}") from e


def evaluate_rhs(model, y):
    y1, y2 = float(y[0]), float(y[1])
    features = np.array([1.0, y1, y2, y1 * y1, y1 * y2, y2 * y2])
    return model.coeffs @ features


def evaluate_jacobian(model, y):
    y1, y2 = float(y[0]), float(y[1])
    b = model.coeffs
    return np.array([
        [b[i, 1] + 2 * b[i, 3] * y1 + b[i, 4] * y2, b[i, 2] + b[i, 4] * y1 + 2 * b[i, 5] * y2]
        for i in range(2)
    ])


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0

    @property
    def n_steps(self):
        return self.n_accepted

    @property
    def final(self):
        return self.states[-1]

    def sample(self, times):
        """Evaluates the cubic Hermite dense output at ``times``."""
        times = np.asarray(times, dtype=float)
        lo, hi = self.times[0], self.times[-1]
        span = hi - lo
        if times.size and (times.min() < lo - 1e-9 * span or times.max() > hi + 1e-9 * span):
            raise IntegrationError(f"sample times outside the integrated span [{lo}, {hi}]")
        if self.times.size == 1:
            return np.repeat(self.states[:1], times.size, axis=0)
        spline = CubicHermiteSpline(self.times, self.states, self.derivatives, axis=0)
        return spline(np.clip(times, lo, hi))

    def to_frame(self, species=('y1', 'y2')):
        frame = pd.DataFrame(self.states, columns=list(species))
        frame.insert(0, 't', self.times)
        return frame


class SdirkIntegrator:
    """
    Single-use adaptive integrator for y' = rhs(t, y).

    Args:
        rhs: callable returning dy/dt.
        jac: callable returning the Jacobian of ``rhs`` with respect to y.
        cfg: tolerances, derivative guard and step budget.
    """

    def __init__(self, rhs: Callable, jac: Callable, cfg: Optional[IntegratorConfig] = None):
        self.rhs = rhs
        self.jac = jac
        self.cfg = cfg or IntegratorConfig()
        self.n_accepted = 0
        self.n_rejected = 0
        self.n_jacobians = 0
        self.n_factorizations = 0
        self._used = False

    # --- guard ---

    def _checked_rhs(self, t, y):
        f = np.asarray(self.rhs(t, y), dtype=float)
        bad = ~np.isfinite(f) | (np.abs(f) > self.cfg.epsilon_guard)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DerivativeBlowup(t, i, abs(f[i]))
        return f

    # --- one SDIRK step ---

    def _stage(self, t, base, h, lu, guess):
        """Solves Y = base + h*gamma*f(t, Y) by simplified Newton."""
        Y = guess.copy()
        scale = self.cfg.atol + self.cfg.rtol * np.abs(guess)
        prev = math.inf
        for _ in range(NEWTON_MAX_ITER):
            with np.errstate(over='ignore', invalid='ignore'):
                G = Y - base - h * GAMMA * np.asarray(self.rhs(t, Y), dtype=float)
            if not np.isfinite(G).all():
                return None
            dY = lu_solve(lu, -G)
            Y = Y + dY
            norm = float(np.max(np.abs(dY) / scale))
            if norm <= NEWTON_TOL:
                return Y
            if norm > 2 * prev:
                return None
            prev = norm
        return None

    def _step(self, t, y, f, h, lu):
        """One SDIRK step of size h with the factored iteration matrix ``lu``. Returns (y_new, f_new) or None."""
        Y1 = self._stage(t + GAMMA * h, y, h, lu, y + GAMMA * h * f)
        if Y1 is None:
            return None
        f1 = np.asarray(self.rhs(t + GAMMA * h, Y1), dtype=float)
        base = y + h * (1 - GAMMA) * f1
        Y2 = self._stage(t + h, base, h, lu, y + h * f1)
        if Y2 is None:
            return None
        with np.errstate(over='ignore', invalid='ignore'):
            f2 = np.asarray(self.rhs(t + h, Y2), dtype=float)
        if not (np.isfinite(Y2).all() and np.isfinite(f2).all()):
            return None
        return Y2, f2

    def _initial_step(self, t0, y0, f0, span):
        scale = self.cfg.atol + self.cfg.rtol * np.abs(y0)
        d0 = float(np.max(np.abs(y0) / scale))
        d1 = float(np.max(np.abs(f0) / scale))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        with np.errstate(over='ignore', invalid='ignore'):
            f1 = np.asarray(self.rhs(t0 + h0, y0 + h0 * f0), dtype=float)
        d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0 if np.isfinite(f1).all() else math.inf
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / 3.0)
        return min(100 * h0, h1, span)

    def integrate(self, y0, t_span):
        """
        Integrates from t_span[0] to t_span[1].

        Returns:
            Trajectory holding every accepted node (half-step nodes included)
            with its derivative, for Hermite dense output.
        """
        if self._used:
            raise IntegrationError("integrator instances are single-use")
        self._used = True
        t0, tf = float(t_span[0]), float(t_span[1])
        if not t0 < tf:
            raise ConfigError(f"integration span must satisfy t0 < tf, got ({t0}, {tf})")
        y = np.array(y0, dtype=float)
        if not np.isfinite(y).all():
            raise ConfigError("initial state must be finite")

        cfg = self.cfg
        t = t0
        f = self._checked_rhs(t, y)
        times, states, derivs = [t], [y.copy()], [f.copy()]
        h = self._initial_step(t0, y, f, tf - t0)
        attempts = 0

        while t < tf:
            if attempts >= cfg.max_steps:
                raise StepLimitExceeded(f"step budget of {cfg.max_steps} exhausted at t = {t:.6g} h")
            attempts += 1
            h_min = 16 * np.finfo(float).eps * max(1.0, abs(t))
            last = t + h >= tf - h_min
            if last:
                h = tf - t
            # one Jacobian per attempt; the h/2 factorization serves both half steps
            J = np.asarray(self.jac(t, y), dtype=float)
            eye = np.eye(y.size)
            lu_full = lu_factor(eye - h * GAMMA * J)
            lu_half = lu_factor(eye - (h / 2) * GAMMA * J)
            self.n_jacobians += 1
            self.n_factorizations += 2

            full = self._step(t, y, f, h, lu_full)
            half1 = self._step(t, y, f, h / 2, lu_half) if full is not None else None
            half2 = None
            if half1 is not None:
                y_mid, f_mid = half1
                half2 = self._step(t + h / 2, y_mid, f_mid, h / 2, lu_half)
            if half2 is None:
                self.n_rejected += 1
                h /= 2
                if h < h_min:
                    raise NewtonDivergence(t)
                continue

            y_new, _ = half2
            err = (y_new - full[0]) / 3.0
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale))
            if err_norm > 1.0:
                self.n_rejected += 1
                h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1.0 / 3.0))
                if h < h_min:
                    raise NewtonDivergence(t, "step size underflow")
                continue

            # guard on both accepted nodes before committing them
            t_mid = t + h / 2
            t_new = tf if last else t + h
            f_mid = self._checked_rhs(t_mid, y_mid)
            f_new = self._checked_rhs(t_new, y_new)
            times += [t_mid, t_new]
            states += [y_mid, y_new]
            derivs += [f_mid, f_new]
            t, y, f = t_new, y_new, f_new
            self.n_accepted += 1
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err_norm ** (-1.0 / 3.0)))
            h *= factor

        logging.debug(f"Integrated [{t0}, {tf}] in {self.n_accepted} steps ({self.n_rejected} rejected)")
        return Trajectory(np.array(times), np.array(states), np.array(derivs), self.n_accepted, self.n_rejected)


def integrate(model, y0, t_span, cfg: Optional[IntegratorConfig] = None):
    return SdirkIntegrator(model.rhs, model.jac, cfg).integrate(y0, t_span)


def model_from_fits(fits: Sequence, species, norm_params=None, ranks=None):
    coeffs = np.vstack([np.nan_to_num(fit.beta, nan=0.0) for fit in fits])
    return QuadraticModel(coeffs, tuple(species), norm_params, ranks, tuple(fit.mask for fit in fits))


def select_feasible_model(rankings: Sequence, y0, t_span, cfg: Optional[IntegratorConfig] = None, norm_params=None):
    """
    Returns the best-ranked jointly integrable pair of models together with
    the trajectory that proved it integrable.

    Both species start at rank 1. Whenever the pair fails to integrate, every
    species' counter moves on by one, so the candidates are always the l-th
    ranked model of each species.
    """
    cfg = cfg or IntegratorConfig()
    species = tuple(r.species for r in rankings)
    depth = min(len(r) for r in rankings)
    for l in range(depth):
        fits = [r[l] for r in rankings]
        if not all(fit.feasible for fit in fits):
            logging.warning(f"Rank {l + 1}: a ranked fit is rank-deficient; advancing")
            continue
        model = model_from_fits(fits, species, norm_params, ranks=tuple([l + 1] * len(fits)))
        try:
            traj = integrate(model, y0, t_span, cfg)
        except IntegrationError as e:
            logging.warning(f"Discarding rank-{l + 1} models {[mask_label(f.mask) for f in fits]}: {e}")
            continue
        logging.info(f"Selected rank-{l + 1} models after discarding {l}: {[mask_label(f.mask) for f in fits]}")
        return model, traj
    raise AllModelsInfeasible(f"all {depth} ranked model pairs failed to integrate over {tuple(t_span)}")
