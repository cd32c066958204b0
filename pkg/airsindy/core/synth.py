"""
Ground-truth generators: Leighton-cycle kinetics and planted quadratic models.

Synthetic stations come out in the standard dataset schema so they exercise
ingestion, preprocessing and fitting end to end.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

from airsindy.core.dataset import dataset_from_frame
from airsindy.core.errors import ConfigError, KineticsError
from airsindy.core.ode import IntegratorConfig, QuadraticModel, SdirkIntegrator

ORACLE_CONFIG = dict(rtol=1e-10, atol=1e-12)
LEIGHTON_SPECIES = ('NO2', 'NO', 'O3')


def constant_actinic(j0):
    if j0 < 0:
        raise KineticsError(f"photolysis rate must be nonnegative, got {j0}")
    return lambda t: j0


def diurnal_actinic(peak, sunrise=6.0, sunset=18.0):
    """Half-sine photolysis rate during daylight hours, zero at night. t in hours."""
    if peak < 0 or not 0 <= sunrise < sunset <= 24:
        raise KineticsError(f"invalid diurnal profile (peak={peak}, sunrise={sunrise}, sunset={sunset})")

    def J(t):
        hour = t % 24.0
        if sunrise <= hour <= sunset:
            return peak * math.sin(math.pi * (hour - sunrise) / (sunset - sunrise))
        return 0.0
    return J


@dataclass(frozen=True)
class LeightonParams:
    J: Callable = field(default_factory=lambda: constant_actinic(0.5))
    k3: float = 0.02

    def __post_init__(self):
        if not self.k3 > 0:
            raise KineticsError(f"k3 must be positive, got {self.k3}")


@dataclass(frozen=True)
class KineticsState:
    no2: float
    no: float
    o3: float

    def as_array(self):
        return np.array([self.no2, self.no, self.o3], dtype=float)


def leighton_rhs(p: LeightonParams, s, t):
    """(d[NO2], d[NO], d[O3]) for photolysis J(t) and titration rate k3."""
    no2, no, o3 = s.as_array() if isinstance(s, KineticsState) else np.asarray(s, dtype=float)
    j = p.J(t)
    if j < 0:
        raise KineticsError(f"photolysis rate J({t}) = {j} is negative")
    net = j * no2 - p.k3 * no * o3
    return np.array([-net, net, net])


def leighton_jacobian(p: LeightonParams, s, t):
    no2, no, o3 = np.asarray(s, dtype=float)
    j = p.J(t)
    row = np.array([j, -p.k3 * o3, -p.k3 * no])
    return np.vstack([-row, row, row])


def simulate_kinetics(p: LeightonParams, y0, duration, cfg: Optional[IntegratorConfig] = None):
    y0 = y0.as_array() if isinstance(y0, KineticsState) else np.asarray(y0, dtype=float)
    if (y0 < 0).any():
        raise KineticsError(f"initial concentrations must be nonnegative, got {y0}")
    cfg = cfg or IntegratorConfig(**ORACLE_CONFIG)
    integrator = SdirkIntegrator(lambda t, y: leighton_rhs(p, y, t), lambda t, y: leighton_jacobian(p, y, t), cfg)
    traj = integrator.integrate(y0, (0.0, float(duration)))
    if traj.states.min() < -1e-9:
        raise KineticsError(f"concentrations went negative ({traj.states.min():.3g})")
    return traj


@dataclass(frozen=True)
class SyntheticSpec:
    model: Union[QuadraticModel, LeightonParams]
    y0: tuple
    duration: float
    noise_sigma: float = 0.0
    seed: int = 0
    station: str = 'SYNTH'
    start: str = '2018-04-01T08:00:00+00:00'
    dt_hours: float = 1.0
    scale: Optional[tuple] = None
    clip_at_zero: bool = False

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")
        if not self.dt_hours > 0:
            raise ConfigError(f"sampling step must be positive, got {self.dt_hours}")


def sample_hours(duration, dt_hours):
    n = int(math.floor(duration / dt_hours + 1e-9)) + 1
    return np.arange(n) * dt_hours


def synth_dataset(spec: SyntheticSpec):
    """Integrates the planted system, samples it and adds seeded Gaussian noise."""
    hours = sample_hours(spec.duration, spec.dt_hours)
    if isinstance(spec.model, LeightonParams):
        traj = simulate_kinetics(spec.model, spec.y0, hours[-1])
        values = traj.sample(hours)
        species = LEIGHTON_SPECIES
        physical = True
    else:
        cfg = IntegratorConfig(**ORACLE_CONFIG)
        traj = SdirkIntegrator(spec.model.rhs, spec.model.jac, cfg).integrate(spec.y0, (0.0, hours[-1]))
        values = traj.sample(hours)
        species = spec.model.species
        physical = spec.scale is not None
        if physical:
            mu = np.array([m for m, _ in spec.scale])
            sigma = np.array([s for _, s in spec.scale])
            values = mu + values * sigma

    rng = np.random.default_rng(spec.seed)
    if spec.noise_sigma > 0:
        values = values + rng.normal(0.0, spec.noise_sigma, size=values.shape)
    if spec.clip_at_zero or (physical and spec.noise_sigma > 0):
        values = np.clip(values, 0.0, None)

    frame = pd.DataFrame(values, columns=list(species))
    ds = dataset_from_frame(frame, spec.station, spec.start, spec.dt_hours)
    logging.info(f"Generated synthetic station {spec.station}: {len(hours)} samples of {list(species)}, noise {spec.noise_sigma}")
    return ds


# --- planted presets ---

# Fitted systems for 5- and 11-hour windows at alpha=0.25, AIC selection.
WINDOW_5H_COEFFS = np.array([
    [-0.7561, -1.2358, -1.3949, 0.0, -1.0494, -0.6539],
    [-0.6142, 0.6275, 0.7181, 0.0, 0.2640, 0.1814],
])
WINDOW_11H_COEFFS = np.array([
    [-0.4279, -0.7495, -0.8854, -6.3679, -12.488, -5.8383],
    [0.4317, 0.9800, 1.0719, 2.7402, 5.2943, 2.2776],
])


def preset(name, noise_sigma=0.0, seed=0):
    if name == 'quadratic-5h':
        return SyntheticSpec(QuadraticModel(WINDOW_5H_COEFFS, ('NO2', 'O3')), (-1.0, 1.0), 4.0, noise_sigma, seed)
    if name == 'quadratic-11h':
        return SyntheticSpec(QuadraticModel(WINDOW_11H_COEFFS, ('NO2', 'O3')), (0.0, 0.0), 10.0, noise_sigma, seed)
    if name == 'leighton':
        return SyntheticSpec(LeightonParams(constant_actinic(0.5), 0.02), (40.0, 10.0, 30.0), 24.0, noise_sigma, seed)
    raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")


PRESETS = ('quadratic-5h', 'quadratic-11h', 'leighton')
