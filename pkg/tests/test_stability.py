import numpy as np
import pytest

from airsindy.core.errors import ConfigError, IllConditionedResultantError, SharedComponentError
from airsindy.core.ode import QuadraticModel, evaluate_jacobian, evaluate_rhs
from airsindy.core.stability import (
    PointClass,
    classify_jacobian,
    critical_points,
    destandardize,
    physical_model,
    standardize_point,
)

# competing species: y1' = y1 (1 - y1 - y2), y2' = y2 (0.5 - y2 - 0.25 y1)
COMPETITION = np.array([
    [0.0, 1.0, 0.0, -1.0, -1.0, 0.0],
    [0.0, 0.0, 0.5, 0.0, -0.25, -1.0],
])


@pytest.mark.parametrize('J, expected', [
    ([[-1, 0], [0, -2]], PointClass.STABLE_NODE),
    ([[1, 0], [0, 2]], PointClass.UNSTABLE_NODE),
    ([[1, 0], [0, -1]], PointClass.SADDLE),
    ([[-1, 2], [-2, -1]], PointClass.STABLE_SPIRAL),
    ([[1, 2], [-2, 1]], PointClass.UNSTABLE_SPIRAL),
    ([[0, 1], [-1, 0]], PointClass.DEGENERATE),
    ([[-1, 1], [0, -1]], PointClass.DEGENERATE),
    ([[0, 0], [0, -1]], PointClass.DEGENERATE),
    ([[-3, 0], [0, -3]], PointClass.STABLE_NODE),
])
def test_classify_jacobian(J, expected):
    assert classify_jacobian(J)[0] is expected


def test_logistic_points():
    # y1' = y1 - y1^2, y2' = -y2
    model = QuadraticModel([[0, 1, 0, -1, 0, 0], [0, 0, -1, 0, 0, 0]])
    report = critical_points(model)
    real = report.real_points
    assert [p.real for p in real] == [pytest.approx((0.0, 0.0), abs=1e-12), pytest.approx((1.0, 0.0), abs=1e-12)]
    assert real[0].point_class is PointClass.SADDLE
    assert real[1].point_class is PointClass.STABLE_NODE
    assert report.counts == {'Saddle': 1, 'StableNode': 1}


def test_logistic_product_corners():
    # y1' = y1 (1 - y1), y2' = y2 (1 - y2)
    model = QuadraticModel([[0, 1, 0, -1, 0, 0], [0, 0, 1, 0, 0, -1]])
    report = critical_points(model)
    expected = {
        (0.0, 0.0): PointClass.UNSTABLE_NODE,
        (0.0, 1.0): PointClass.SADDLE,
        (1.0, 0.0): PointClass.SADDLE,
        (1.0, 1.0): PointClass.STABLE_NODE,
    }
    assert len(report.real_points) == 4
    for point in report.real_points:
        corner = tuple(float(round(v)) for v in point.real)
        np.testing.assert_allclose(point.real, corner, atol=1e-10)
        assert np.max(np.abs(evaluate_rhs(model, point.real))) <= 1e-10
        assert point.point_class is expected[corner]


def test_two_conics_meet_in_four_points():
    model = QuadraticModel(COMPETITION)
    report = critical_points(model)
    assert len(report.real_points) == 4
    assert report.multiplicity_total == 4
    expected = [(0.0, 0.0), (0.0, 0.5), (2 / 3, 1 / 3), (1.0, 0.0)]
    for point, (y1, y2) in zip(report.real_points, expected):
        np.testing.assert_allclose(point.real, (y1, y2), atol=1e-10)
        assert np.max(np.abs(evaluate_rhs(model, point.real))) <= 1e-8
    classes = [p.point_class for p in report.real_points]
    assert classes == [PointClass.UNSTABLE_NODE, PointClass.SADDLE, PointClass.STABLE_NODE, PointClass.SADDLE]


def test_complex_points_come_in_conjugate_pairs():
    # y1' = y1^2 + 1, y2' = y2: no real equilibrium
    model = QuadraticModel([[1, 0, 0, 1, 0, 0], [0, 0, 1, 0, 0, 0]])
    report = critical_points(model)
    assert report.real_points == []
    assert len(report.points) == 2
    a, b = (p.z for p in report.points)
    np.testing.assert_allclose(a, np.conj(b), atol=1e-10)
    assert report.counts == {}


def test_linear_system_has_one_point():
    model = QuadraticModel([[1, -1, 0, 0, 0, 0], [2, 0, -2, 0, 0, 0]])
    (point,) = critical_points(model).points
    np.testing.assert_allclose(point.real, (1.0, 1.0))
    assert point.point_class is PointClass.STABLE_NODE


def test_coincident_nullclines_are_rejected():
    with pytest.raises(SharedComponentError):
        critical_points(QuadraticModel([[0, 1, 1, 0, 0, 0], [0, 2, 2, 0, 0, 0]]))
    with pytest.raises(SharedComponentError):
        critical_points(QuadraticModel([[0, 0, 0, 1, 0, 0], [0, 0, 0, 2, 0, 0]]))


def test_destandardize():
    assert destandardize([1.0, 0.0], ((2.0, 3.0), (0.0, 1.0)))[0] == 5.0
    np.testing.assert_array_equal(destandardize([0.3, -0.7], ((0, 1), (0, 1))), [0.3, -0.7])
    np.testing.assert_allclose(standardize_point(destandardize([0.3, -0.7], ((40, 10), (50, 12))), ((40, 10), (50, 12))),
                               [0.3, -0.7])
    with pytest.raises(ConfigError):
        destandardize([1.0, 1.0], ((0.0, 0.0), (0.0, 1.0)))


def test_classes_survive_the_change_to_physical_units():
    norm = ((40.0, 10.0), (50.0, 12.0))
    model = QuadraticModel(COMPETITION, ('NO2', 'O3'), norm)
    report = critical_points(model)
    physical = critical_points(physical_model(model))
    assert len(physical.real_points) == len(report.real_points)
    for z, x in zip(report.real_points, physical.real_points):
        np.testing.assert_allclose(x.real, z.physical, rtol=1e-9, atol=1e-9)
        assert x.point_class is z.point_class


def test_physical_model_matches_the_standardized_flow():
    norm = ((40.0, 10.0), (50.0, 12.0))
    model = QuadraticModel(COMPETITION, ('NO2', 'O3'), norm)
    phys = physical_model(model)
    z = np.array([0.4, -0.3])
    x = destandardize(z, norm)
    np.testing.assert_allclose(evaluate_rhs(phys, x), evaluate_rhs(model, z) * np.array([10.0, 12.0]))


def test_report_serializes():
    report = critical_points(QuadraticModel(COMPETITION))
    out = report.to_dict()
    assert out['multiplicity_total'] == 4
    assert out['points'][0]['class'] == 'UnstableNode'
    assert len(out['points'][0]['eigenvalues']) == 2


def test_random_models_keep_their_classes_in_physical_units():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(20):
        norm = tuple((float(rng.uniform(10, 80)), float(rng.uniform(2, 20))) for _ in range(2))
        model = QuadraticModel(rng.normal(size=(2, 6)), ('NO2', 'O3'), norm)
        try:
            report = critical_points(model)
        except IllConditionedResultantError:
            continue
        phys = physical_model(model)
        for point in report.real_points:
            x = destandardize(point.real, norm)
            cls, _ = classify_jacobian(evaluate_jacobian(phys, x))
            assert cls is point.point_class
            bound = 1e-6 * (1 + np.abs(x).max()) ** 2 * np.abs(phys.coeffs).max()
            assert np.max(np.abs(evaluate_rhs(phys, x))) <= bound
            checked += 1
    assert checked >= 10


def test_points_match_sign_changes_on_a_fine_grid():
    model = QuadraticModel(COMPETITION)
    n = 400
    axis = np.linspace(-0.5, 1.5, n + 1)
    spacing = axis[1] - axis[0]
    Y1, Y2 = np.meshgrid(axis, axis, indexing='ij')
    F = np.einsum('ij,jkl->ikl', COMPETITION, np.array([np.ones_like(Y1), Y1, Y2, Y1 * Y1, Y1 * Y2, Y2 * Y2]))

    def straddles(G):
        corners = np.array([G[:-1, :-1], G[1:, :-1], G[:-1, 1:], G[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    i, j = np.nonzero(straddles(F[0]) & straddles(F[1]))
    centers = np.column_stack([axis[i] + spacing / 2, axis[j] + spacing / 2])
    points = np.array([p.real for p in critical_points(model).real_points])
    distance = np.linalg.norm(centers[:, None, :] - points[None, :, :], axis=2)
    assert distance.min(axis=1).max() <= 5 * spacing
    assert distance.min(axis=0).max() <= 2 * spacing
