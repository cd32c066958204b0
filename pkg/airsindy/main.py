import argparse
import json
import logging
import sys

import numpy as np
import pandas as pd

from airsindy import settings
from airsindy.agent.reconstruction import reconstruct_hidden
from airsindy.agent.sweep import AlphaGrid, PipelineConfig, minmax_alpha, station_fit
from airsindy.agent.windows import parse_lengths, window_sparsity
from airsindy.core.dataset import TimeWindow, load_csv, select_window, stations_with, write_csv
from airsindy.core.errors import AirSindyError, AllModelsInfeasible, ConfigError, EXIT_USAGE
from airsindy.core.ode import IntegratorConfig, QuadraticModel, integrate
from airsindy.core.preprocess import DEFAULT_REFINEMENT, process_series
from airsindy.core.regression import Criterion
from airsindy.core.stability import critical_points, physical_model
from airsindy.core.synth import PRESETS, preset, synth_dataset
from airsindy.ui import plots
from airsindy.ui.report import RunManifest


def _timestamp(text):
    try:
        return pd.Timestamp(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 timestamp: {text!r}") from e


def _species_pair(text):
    parts = [p.strip() for p in text.split(',') if p.strip()]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated species, got {text!r}")
    return tuple(parts)


def build_parser():
    parser = argparse.ArgumentParser(prog='airsindy', description='Sparse quadratic models of NO2/O3 dynamics.')
    parser.add_argument('--out', default=settings.OUTPUT_DIR, help='artifact directory')
    parser.add_argument('--log-file', default=settings.LOG_FILE)
    parser.add_argument('--log-level', default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest='command', required=True)

    def data_args(p, window=True):
        p.add_argument('--data', required=True, help='long-format readings CSV')
        p.add_argument('--station-meta', help='optional station metadata CSV')
        if window:
            p.add_argument('--from', dest='start', type=_timestamp, required=True)
            p.add_argument('--to', dest='end', type=_timestamp, required=True)

    def fit_args(p):
        p.add_argument('--species', type=_species_pair, default=('NO2', 'O3'))
        p.add_argument('--criterion', choices=[c.value for c in Criterion], default='aic')
        p.add_argument('--method', choices=['best_subset', 'lasso'], default='best_subset')
        p.add_argument('--lambda', dest='lam', type=float, default=0.0)
        p.add_argument('--refinement', type=int, default=DEFAULT_REFINEMENT)
        p.add_argument('--epsilon', type=float, default=settings.EPSILON_GUARD)
        p.add_argument('--rtol', type=float, default=1e-6)
        p.add_argument('--atol', type=float, default=1e-9)

    p = sub.add_parser('ingest', help='validate a readings CSV')
    data_args(p, window=False)

    p = sub.add_parser('fit', help='fit one station at one smoothing factor')
    data_args(p)
    p.add_argument('--station', required=True)
    p.add_argument('--alpha', type=float, default=0.10)
    fit_args(p)

    p = sub.add_parser('sweep', help='min-max smoothing-factor sweep')
    data_args(p)
    p.add_argument('--stations', help='comma-separated station ids (default: every station with both species)')
    p.add_argument('--alpha-grid', default='default')
    p.add_argument('--jobs', type=int, default=settings.N_JOBS)
    fit_args(p)

    p = sub.add_parser('sparsity', help='selected terms against window length')
    data_args(p, window=False)
    p.add_argument('--station', required=True)
    p.add_argument('--from', dest='start', type=_timestamp, required=True)
    p.add_argument('--hours', default='5,8,11', help='comma-separated window lengths in hours')
    p.add_argument('--alpha', type=float, default=0.25)
    p.add_argument('--jobs', type=int, default=settings.N_JOBS)
    fit_args(p)

    p = sub.add_parser('stability', help='critical points of a fitted model')
    p.add_argument('--model', required=True, help='model.json written by fit')
    p.add_argument('--horizon', type=float, default=0.0, help='hours of trajectory to draw from --y0')
    p.add_argument('--y0', type=float, nargs=2)

    p = sub.add_parser('reconstruct', help='delay-embedding reconstruction of a hidden species')
    data_args(p)
    p.add_argument('--station', required=True)
    p.add_argument('--species', default='NO2')
    p.add_argument('--hidden', help='species to compare against when it was measured')
    p.add_argument('--alpha', type=float, default=0.10)
    p.add_argument('--refinement', type=int, default=DEFAULT_REFINEMENT)
    p.add_argument('--tau', type=int)
    p.add_argument('--tau-max', type=int)
    p.add_argument('--bins', type=int)

    p = sub.add_parser('synth', help='write a synthetic station dataset')
    p.add_argument('--planted', choices=PRESETS, required=True)
    p.add_argument('--noise', type=float, default=0.0)
    p.add_argument('--seed', type=int, default=0)
    return parser


def _pipeline_config(args, window):
    return PipelineConfig(
        window=window,
        species=tuple(args.species),
        criterion=args.criterion,
        method=args.method,
        lam=args.lam,
        refinement=args.refinement,
        integrator=IntegratorConfig(args.rtol, args.atol, args.epsilon),
        n_jobs=getattr(args, 'jobs', 1),
    )


def cmd_ingest(args, manifest):
    ds = load_csv(args.data, stations_path=args.station_meta)
    rows = []
    for (station, species), s in sorted(ds.series.items()):
        rows.append({
            'station': station, 'species': species, 't0': s.t0.isoformat(), 'dt_hours': s.dt_hours,
            'samples': len(s), 'missing': int(s.missing.sum()),
        })
    manifest.json('dataset_summary.json', {'stations': ds.station_ids, 'series': rows})
    print(f"{len(ds.station_ids)} stations, {len(rows)} series")


def cmd_fit(args, manifest):
    ds = load_csv(args.data, stations_path=args.station_meta)
    window = TimeWindow(args.start, args.end)
    cfg = _pipeline_config(args, window)
    manifest.config.update(cfg.to_dict())
    outcome = station_fit(ds, args.station, window, args.alpha, cfg)

    for ranking in outcome.rankings:
        manifest.frame(f"ranking_{ranking.species}.csv", ranking.to_frame())
    if not outcome.ok:
        manifest.write()
        raise outcome_error(outcome)

    model = outcome.model
    manifest.json('model.json', {
        'station': args.station,
        'alpha': args.alpha,
        'window': [window.start.isoformat(), window.end.isoformat()],
        'criterion': cfg.criterion.value,
        'method': cfg.method,
        'rmse': outcome.rmse,
        'y0': [float(p.y[0]) for p in outcome.processed],
        'horizon': float(outcome.processed[0].grid[-1]),
        'equations': model.equations(),
        'physical_equations': physical_model(model).equations(),
        **model.to_dict(),
    })
    manifest.frame('trajectory.csv', outcome.trajectory.to_frame(model.species))
    manifest.add(plots.plot_fit_series(outcome, manifest.path('timeseries.svg')))
    manifest.add(plots.plot_state_diagram(outcome, manifest.path('state.svg')))
    print('\n'.join(model.equations()))


def outcome_error(outcome):
    return AllModelsInfeasible(f"station {outcome.station} at alpha={outcome.alpha}: {outcome.message}")


def cmd_sweep(args, manifest):
    ds = load_csv(args.data, stations_path=args.station_meta)
    window = TimeWindow(args.start, args.end)
    cfg = _pipeline_config(args, window)
    grid = AlphaGrid.parse(args.alpha_grid)
    stations = args.stations.split(',') if args.stations else stations_with(ds, cfg.species)
    manifest.config.update(cfg.to_dict(), alpha_grid=list(grid), stations=stations)
    report = minmax_alpha(ds, stations, window, grid, cfg)
    manifest.frame('sweep.csv', report.to_frame())
    manifest.json('sweep_summary.json', report.summary())
    manifest.add(plots.plot_sweep(report, manifest.path('sweep.svg')))
    print(f"alpha* = {report.argmin_alpha} (worst average RMSE {report.objective:.4f})")


def cmd_sparsity(args, manifest):
    ds = load_csv(args.data, stations_path=args.station_meta)
    lengths = parse_lengths(args.hours)
    longest = TimeWindow(args.start, args.start + pd.Timedelta(hours=lengths[-1]))
    cfg = _pipeline_config(args, longest)
    manifest.config.update(cfg.to_dict(), hours=list(lengths))
    report = window_sparsity(ds, args.station, args.start, lengths, args.alpha, cfg)
    manifest.frame('sparsity.csv', report.table)
    manifest.json('sparsity.json', report.summary())
    manifest.add(plots.plot_sparsity(report, manifest.path('sparsity.svg')))
    print(report.k_by_length().to_string())


def cmd_stability(args, manifest):
    try:
        with open(args.model, encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read model file {args.model}: {e}") from e
    model = QuadraticModel.from_dict(data)
    report = critical_points(model)

    trajectory = None
    y0 = args.y0 or data.get('y0')
    horizon = args.horizon or data.get('horizon', 0.0)
    if y0 is not None and horizon > 0:
        trajectory = integrate(model, np.asarray(y0, dtype=float), (0.0, horizon))

    out = report.to_dict()
    out['equations'] = model.equations()
    if model.norm_params is not None:
        out['physical_equations'] = physical_model(model).equations()
    manifest.json('stability.json', out)
    manifest.add(plots.plot_phase_portrait(model, report, manifest.path('phase_portrait.svg'), trajectory))
    for p in report.points:
        label = p.point_class.value if p.point_class else 'complex'
        print(f"{label}: {p.real if p.is_real else p.z}")


def cmd_reconstruct(args, manifest):
    ds = load_csv(args.data, stations_path=args.station_meta)
    window = TimeWindow(args.start, args.end)
    species = [args.species] + ([args.hidden] if args.hidden else [])
    raws = select_window(ds, args.station, species, window)
    processed = [process_series(raw, args.alpha, args.refinement) for raw in raws]
    hidden = processed[1] if args.hidden else None
    result = reconstruct_hidden(processed[0], hidden=hidden, tau=args.tau, tau_max=args.tau_max, bins=args.bins)

    manifest.frame('reconstruction.csv', result.to_frame())
    manifest.json('reconstruction.json', {
        'station': args.station,
        'species': args.species,
        'hidden': args.hidden,
        'tau': result.tau,
        'fallback_lag': bool(result.lag.fallback) if result.lag else None,
        'correction': result.correction.to_dict(),
        'correlation': result.correlation,
    })
    manifest.add(plots.plot_reconstruction(result, manifest.path('reconstruction.svg')))
    if result.lag is not None:
        manifest.add(plots.plot_ami(result.lag, manifest.path('ami.svg')))
    print(f"tau = {result.tau}" + (f", correlation = {result.correlation:.4f}" if result.correlation is not None else ''))


def cmd_synth(args, manifest):
    spec = preset(args.planted, args.noise, args.seed)
    ds = synth_dataset(spec)
    manifest.add(write_csv(ds, manifest.path(f"synth_{args.planted}.csv")))
    print(f"wrote {len(ds.series)} series for station {spec.station}")


COMMANDS = {
    'ingest': cmd_ingest,
    'fit': cmd_fit,
    'sweep': cmd_sweep,
    'sparsity': cmd_sparsity,
    'stability': cmd_stability,
    'reconstruct': cmd_reconstruct,
    'synth': cmd_synth,
}


def run(argv=None):
    """Runs one subcommand and returns its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0

    settings.configure_logging(args.log_level, args.log_file)
    config = {k: v for k, v in vars(args).items() if k not in ('log_file', 'log_level')}
    config = json.loads(json.dumps(config, default=str))
    logging.info(f"Running {args.command} with {config}")
    try:
        manifest = RunManifest(args.out, args.command, config)
        COMMANDS[args.command](args, manifest)
        manifest.write()
    except AirSindyError as e:
        logging.error(f"{type(e).__name__} in {e.module}: {e}")
        print(json.dumps({'error': type(e).__name__, 'module': e.module, 'message': str(e)}), file=sys.stderr)
        return e.exit_code
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
