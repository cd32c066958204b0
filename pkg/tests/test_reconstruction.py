import numpy as np
import pytest

from airsindy.agent.reconstruction import reconstruct_hidden
from airsindy.core.embedding import ami
from airsindy.core.errors import EmbeddingError
from airsindy.core.ode import QuadraticModel, integrate


def stable_spiral(period=10.0, decay=0.02, hours=40.0, step=0.05):
    """Samples y1' = -a y1 - w y2, y2' = w y1 - a y2 on a uniform grid."""
    w = 2 * np.pi / period
    model = QuadraticModel([[0, -decay, -w, 0, 0, 0], [0, w, -decay, 0, 0, 0]])
    times = np.arange(0.0, hours + step / 2, step)
    traj = integrate(model, (1.0, 0.0), (0.0, times[-1]))
    states = traj.sample(times)
    return times, states[:, 0], states[:, 1]


def test_quarter_period_lag_recovers_the_hidden_species():
    times, y1, y2 = stable_spiral()
    result = reconstruct_hidden(y1, times=times, hidden=y2, tau=50)
    assert result.tau == 50
    assert result.lag is None
    assert result.correlation >= 0.9
    n = y1.size - 50
    assert result.reconstructed.shape == (n, 2)
    np.testing.assert_array_equal(result.times, times[:n])
    frame = result.to_frame()
    assert list(frame.columns) == ['t', 'measured', 'reconstructed', 'actual']


def test_lag_chosen_by_mutual_information_recovers_the_hidden_species():
    times, y1, y2 = stable_spiral()
    result = reconstruct_hidden(y1, times=times, hidden=y2, tau_max=120, bins=10)
    assert result.lag is not None and not result.lag.fallback
    assert result.tau == result.lag.tau
    # a direct scan up to half a period (100 steps) bottoms out at the same lag
    scan = [ami(y1, tau, 10) for tau in range(1, 100)]
    assert abs(result.tau - (int(np.argmin(scan)) + 1)) <= 2
    assert result.correlation >= 0.9
    np.testing.assert_allclose(result.correction.matrix.T @ result.correction.matrix, np.eye(2), atol=1e-10)


def test_mismatched_inputs_are_rejected():
    times, y1, y2 = stable_spiral(hours=10.0)
    with pytest.raises(EmbeddingError):
        reconstruct_hidden(y1, times=times[:-1], tau=5)
    with pytest.raises(EmbeddingError):
        reconstruct_hidden(y1, times=times, hidden=y2[:-1], tau=5)
