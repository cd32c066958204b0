"""SVG figures for fits, sweeps, phase portraits and reconstructions."""
import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from airsindy.core.ode import evaluate_rhs  # noqa: E402
from airsindy.core.stability import PointClass  # noqa: E402

# fixed salt and no date metadata keep SVG output byte-identical between runs
matplotlib.rcParams['svg.hashsalt'] = 'airsindy'

CLASS_COLORS = {
    PointClass.STABLE_NODE: 'tab:green',
    PointClass.UNSTABLE_NODE: 'tab:red',
    PointClass.SADDLE: 'tab:orange',
    PointClass.STABLE_SPIRAL: 'tab:blue',
    PointClass.UNSTABLE_SPIRAL: 'tab:purple',
    PointClass.DEGENERATE: 'tab:gray',
}


def _save(fig, path):
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def plot_fit_series(outcome, path):
    """Standardized readings against the integrated fit, one panel per species."""
    fig, axes = plt.subplots(len(outcome.processed), 1, figsize=(7, 5), sharex=True)
    for ax, p, i in zip(np.atleast_1d(axes), outcome.processed, range(len(outcome.processed))):
        hours = np.arange(p.normalized.values.size) * p.normalized.dt_hours
        ax.plot(hours, p.normalized.values, 'o', color='black', label='standardized readings')
        ax.plot(p.grid, p.y, color='tab:gray', lw=1, label='filtered spline')
        if outcome.trajectory is not None:
            ax.plot(p.grid, outcome.trajectory.sample(p.grid)[:, i], color='tab:blue', label='fitted system')
        ax.set_ylabel(p.species)
        ax.legend(loc='best', fontsize=7)
    np.atleast_1d(axes)[-1].set_xlabel('hours from window start')
    fig.suptitle(f"{outcome.station}, alpha = {outcome.alpha}")
    return _save(fig, path)


def plot_state_diagram(outcome, path):
    """Trajectory in the (y1, y2) plane: data against the fit."""
    a, b = outcome.processed
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(a.normalized.values, b.normalized.values, 'o-', color='black', lw=0.8, label='readings')
    if outcome.trajectory is not None:
        states = outcome.trajectory.sample(a.grid)
        ax.plot(states[:, 0], states[:, 1], color='tab:blue', label='fitted system')
    ax.set_xlabel(a.species)
    ax.set_ylabel(b.species)
    ax.legend(loc='best', fontsize=7)
    return _save(fig, path)


def plot_phase_portrait(model, report, path, trajectory=None, margin=1.0, density=21):
    """Vector field with the real critical points coloured by class."""
    pts = np.array([p.real for p in report.real_points]) if report.real_points else np.zeros((0, 2))
    cloud = pts if trajectory is None else np.vstack([pts, trajectory.states])
    if cloud.size:
        lo, hi = cloud.min(axis=0) - margin, cloud.max(axis=0) + margin
    else:
        lo, hi = np.array([-2.0, -2.0]), np.array([2.0, 2.0])
    xs = np.linspace(lo[0], hi[0], density)
    ys = np.linspace(lo[1], hi[1], density)
    X, Y = np.meshgrid(xs, ys)
    U = np.empty_like(X)
    V = np.empty_like(Y)
    for idx in np.ndindex(X.shape):
        U[idx], V[idx] = evaluate_rhs(model, (X[idx], Y[idx]))
    speed = np.hypot(U, V)
    speed[speed == 0] = 1.0

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.quiver(X, Y, U / speed, V / speed, speed, cmap='viridis', angles='xy')
    if trajectory is not None:
        ax.plot(trajectory.states[:, 0], trajectory.states[:, 1], color='black', lw=1.2, label='trajectory')
    for p in report.real_points:
        ax.plot(*p.real, 'o', ms=9, color=CLASS_COLORS[p.point_class], label=p.point_class.value)
    handles, labels = ax.get_legend_handles_labels()
    unique = dict(zip(labels, handles))
    if unique:
        ax.legend(unique.values(), unique.keys(), loc='best', fontsize=7)
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_xlabel(model.species[0])
    ax.set_ylabel(model.species[1])
    return _save(fig, path)


def plot_sweep(report, path):
    """Species-average RMSE and its worst case against alpha."""
    table = report.avg_rmse
    alphas = list(table.columns)
    fig, ax = plt.subplots(figsize=(7, 4))
    for species, row in table.iterrows():
        ax.plot(alphas, row.values, 'o-', lw=1, label=f"mean RMSE {species}")
    ax.plot(alphas, report.worst_average().values, 'k--', lw=1.5, label='worst species')
    ax.axvline(report.argmin_alpha, color='tab:red', lw=1, label=f"alpha* = {report.argmin_alpha}")
    ax.set_xlabel('alpha')
    ax.set_ylabel('RMSE (standardized)')
    ax.legend(loc='best', fontsize=7)
    return _save(fig, path)


def plot_sparsity(report, path):
    """Selected term count per species against window length."""
    table = report.k_by_length()
    fig, ax = plt.subplots(figsize=(6, 4))
    for species in table.columns:
        ax.plot(table.index, table[species].values, 'o-', lw=1, label=species)
    ax.set_xlabel('window length (h)')
    ax.set_ylabel('selected terms k')
    ax.set_ylim(-0.2, 5.2)
    ax.set_title(f"{report.station}, alpha = {report.alpha}")
    ax.legend(loc='best', fontsize=7)
    return _save(fig, path)


def plot_reconstruction(result, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(result.times, result.observed, color='tab:purple', label='measured')
    ax.plot(result.times, result.embedding.points[:, 1], color='tab:orange', lw=1, label=f"lag coordinate (tau = {result.tau})")
    ax.plot(result.times, result.reconstructed[:, 1], color='tab:gray', lw=1.5, label='corrected reconstruction')
    if result.actual is not None:
        ax.plot(result.times, result.actual, 'k:', lw=1, label='actual')
    ax.set_xlabel('hours')
    ax.legend(loc='best', fontsize=7)
    return _save(fig, path)


def plot_ami(lag, path):
    curve = lag.curve
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(curve.lags, curve.ami, color='black', lw=1)
    ax.axvline(lag.tau, color='tab:red', lw=1, label=f"tau = {lag.tau}" + (' (fallback)' if lag.fallback else ''))
    ax.set_xlabel('lag (grid steps)')
    ax.set_ylabel('AMI (nats)')
    ax.legend(loc='best', fontsize=7)
    return _save(fig, path)
