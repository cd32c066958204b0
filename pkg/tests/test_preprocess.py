import math

import numpy as np
import pytest

from airsindy.core.dataset import RawSeries
from airsindy.core.errors import MissingDataError, PreprocessError, TooFewPointsError, ZeroVarianceError
from airsindy.core.preprocess import (
    check_alpha,
    differentiate,
    gaussian_filter,
    gaussian_kernel,
    makima_slopes,
    makima_spline,
    process_series,
    standardize,
    window_length,
)


def raw(values, dt_hours=1.0):
    return RawSeries('S', 'NO2', '2018-04-01T08:00Z', dt_hours, np.asarray(values, dtype=float))


def test_standardize_uses_sample_deviation():
    ns = standardize(raw([1, 2, 3]))
    assert ns.mu == 2.0
    assert ns.sigma == 1.0
    np.testing.assert_allclose(ns.values, [-1.0, 0.0, 1.0])

    ns = standardize(raw([0, 10]))
    np.testing.assert_allclose(ns.values, [-1 / math.sqrt(2), 1 / math.sqrt(2)])
    np.testing.assert_allclose(ns.destandardize(), [0.0, 10.0])


def test_standardize_rejects_constant_and_gaps():
    with pytest.raises(ZeroVarianceError):
        standardize(raw([5.0, 5.0, 5.0]))
    with pytest.raises(MissingDataError):
        standardize(raw([1.0, math.nan, 2.0]))
    with pytest.raises(TooFewPointsError):
        standardize(raw([1.0]))


@pytest.mark.parametrize('alpha, M, expected', [
    (0.0, 9, 1),
    (0.01, 9, 1),
    (1.0, 9, 5),
    (1.0, 4, 3),
    (1.0, 3, 3),
    (0.5, 101, 27),
])
def test_window_length(alpha, M, expected):
    assert window_length(alpha, M) == expected


def test_alpha_outside_unit_interval():
    with pytest.raises(PreprocessError):
        check_alpha(1.5)
    with pytest.raises(PreprocessError):
        window_length(-0.1, 9)


def test_gaussian_kernel_properties():
    k = gaussian_kernel(7)
    assert k.sum() == pytest.approx(1.0, abs=1e-12)
    assert (k > 0).all()
    np.testing.assert_allclose(k, k[::-1])
    assert k.argmax() == 3
    with pytest.raises(PreprocessError):
        gaussian_kernel(4)


def test_filter_identity_at_minimum_alpha():
    x = np.array([0.3, -1.2, 0.8, 0.1, -0.4, 1.5])
    np.testing.assert_array_equal(gaussian_filter(x, 0.01), x)


def test_filter_keeps_constants_and_does_not_add_variation():
    np.testing.assert_allclose(gaussian_filter(np.full(11, 2.5), 0.9), 2.5)
    rng = np.random.default_rng(3)
    x = rng.normal(size=40)
    y = gaussian_filter(x, 0.6)
    assert np.abs(np.diff(y)).sum() <= np.abs(np.diff(x)).sum() + 1e-12


def test_filter_needs_three_points():
    with pytest.raises(TooFewPointsError):
        gaussian_filter(np.array([1.0, 2.0]), 0.5)


def test_makima_slopes_on_a_parabola():
    slopes = makima_slopes([0.0, 1.0, 4.0, 9.0])
    np.testing.assert_allclose(slopes, [1.0, 9 / 7, 35 / 9, 5.0])


def test_spline_hits_knots_and_reproduces_lines():
    knots = np.array([0.0, 1.0, 4.0, 9.0, 3.0])
    grid, y = makima_spline(knots, refinement=10, dt_hours=2.0)
    assert grid.size == 41
    assert grid[-1] == pytest.approx(8.0)
    np.testing.assert_array_equal(y[::10], knots)

    grid, y = makima_spline(np.array([1.0, 3.0, 5.0, 7.0]), refinement=4)
    np.testing.assert_allclose(y, 1.0 + 2.0 * grid, atol=1e-12)


def test_differentiate_backward_differences():
    dy = differentiate([0.0, 0.5, 1.0], [1.0, 2.0, 4.0])
    np.testing.assert_allclose(dy, [2.0, 4.0])
    with pytest.raises(PreprocessError):
        differentiate([0.0, 0.5, 2.0], [1.0, 2.0, 4.0])


def test_process_series_shapes():
    p = process_series(raw([40, 44, 47, 45, 41, 38, 36, 37, 40]), alpha=0.1, refinement=100)
    assert p.grid.size == 801
    assert p.y.size == 801
    assert p.dy.size == 800
    assert p.step == pytest.approx(0.01)
    assert p.species == 'NO2'
    np.testing.assert_allclose(p.y[::100], gaussian_filter(p.normalized, 0.1))
