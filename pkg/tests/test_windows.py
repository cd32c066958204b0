import math

import pytest

from airsindy.agent.sweep import PipelineConfig
from airsindy.agent.windows import check_lengths, parse_lengths, window_sparsity
from airsindy.core.errors import ConfigError, WindowError

START = '2018-04-01T08:00:00Z'


def test_parse_lengths():
    assert parse_lengths('5,8,11') == (5.0, 8.0, 11.0)
    assert parse_lengths('2.5') == (2.5,)
    for bad in ('5,x', '8,5', '0,4', '-1'):
        with pytest.raises(ConfigError):
            parse_lengths(bad)
    with pytest.raises(ConfigError):
        check_lengths([])


def test_support_is_reported_per_window_length(fine_dataset, benign_window):
    cfg = PipelineConfig(benign_window, refinement=10, n_jobs=1)
    report = window_sparsity(fine_dataset, 'FINE', START, (5, 8, 12), 0.01, cfg)
    assert len(report.outcomes) == 3
    assert list(report.table['hours']) == [5.0, 5.0, 8.0, 8.0, 12.0, 12.0]
    assert list(report.table['species']) == ['NO2', 'O3'] * 3

    k = report.k_by_length()
    assert list(k.index) == [5.0, 8.0, 12.0]
    assert k.loc[12.0, 'NO2'] == 1 and k.loc[12.0, 'O3'] == 2
    longest = report.table[report.table['hours'] == 12.0]
    assert list(longest['terms']) == ['{y1}', '{y1, y2}']
    assert (longest['status'] == 'ok').all()
    assert all(0 <= v <= 5 for v in report.table['k'] if not math.isnan(v))

    summary = report.summary()
    assert summary['station'] == 'FINE'
    assert len(summary['rows']) == 6


def test_lengths_past_the_data_are_rejected(fine_dataset, benign_window):
    cfg = PipelineConfig(benign_window, refinement=10, n_jobs=1)
    with pytest.raises(WindowError):
        window_sparsity(fine_dataset, 'FINE', START, (5, 20), 0.01, cfg)
