import numpy as np
import pytest

from core.errors import DimensionError, NotPositiveDefiniteError
from core.factorization import udu_decompose
from core.matrix import DiagonalVector
from core.propagation import (
    PropagationInputs,
    WMGSWorkspace,
    build_candidate,
    propagate_factors,
    wmgs,
)

from . import TOL_PROPAGATION, TOL_W, rel_err


@pytest.mark.parametrize("seed", range(10))
def test_matches_dense_propagation(random_spd, rng, seed):
    n, q = 1 + seed % 7, 1 + seed % 4
    prior = udu_decompose(random_spd(n))
    f = rng.standard_normal((n, n))
    g = rng.standard_normal((n, q))
    q_cov = np.diag(rng.uniform(0.1, 1.0, q))

    ws = build_candidate(PropagationInputs(f, g, q_cov, prior))
    out = wmgs(ws)

    expected = f @ prior.covariance() @ f.T + g @ q_cov @ g.T
    assert rel_err(out.covariance(), expected) <= TOL_PROPAGATION
    assert rel_err(out.u.to_dense() @ ws.v_rows, ws.w_rows) <= TOL_W
    assert np.all(out.d.values >= 0.0)
    assert not ws.degenerate

    gram = (ws.v_rows * ws.d_hat.values) @ ws.v_rows.T
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) <= 1e-10 * np.max(np.diag(gram))
    np.testing.assert_allclose(np.diag(gram), out.d.values, rtol=1e-12)


def test_candidate_layout(random_spd, rng):
    prior = udu_decompose(random_spd(3))
    f = rng.standard_normal((3, 3))
    g = rng.standard_normal((3, 2))
    ws = build_candidate(PropagationInputs(f, g, [0.5, 0.25], prior))
    assert ws.w_rows.shape == (3, 5)
    np.testing.assert_array_equal(ws.w_rows[:, 3:], g)
    np.testing.assert_allclose(ws.w_rows[:, :3], f @ prior.u.to_dense())
    np.testing.assert_array_equal(ws.d_hat.values, np.concatenate([prior.d.values, [0.5, 0.25]]))


def test_correlated_q_is_folded(random_spd, rng):
    prior = udu_decompose(random_spd(4))
    f = rng.standard_normal((4, 4))
    g = rng.standard_normal((4, 3))
    q_cov = random_spd(3)
    out = propagate_factors(PropagationInputs(f, g, q_cov, prior))
    expected = f @ prior.covariance() @ f.T + g @ q_cov @ g.T
    assert rel_err(out.covariance(), expected) <= TOL_PROPAGATION


def test_no_process_noise(random_spd, rng):
    prior = udu_decompose(random_spd(3))
    f = rng.standard_normal((3, 3))
    out = propagate_factors(PropagationInputs(f, None, None, prior))
    assert rel_err(out.covariance(), f @ prior.covariance() @ f.T) <= TOL_PROPAGATION


def test_zero_weights_are_allowed(random_spd):
    prior = udu_decompose(random_spd(2))
    out = propagate_factors(PropagationInputs(np.eye(2), np.eye(2), np.zeros((2, 2)), prior))
    assert rel_err(out.covariance(), prior.covariance()) <= TOL_PROPAGATION


def test_negative_q_raises(random_spd):
    prior = udu_decompose(random_spd(2))
    with pytest.raises(NotPositiveDefiniteError):
        PropagationInputs(np.eye(2), np.eye(2), [1.0, -0.1], prior)


def test_shape_checks(random_spd):
    prior = udu_decompose(random_spd(3))
    with pytest.raises(DimensionError):
        PropagationInputs(np.eye(2), np.eye(3), np.eye(3), prior)
    with pytest.raises(DimensionError):
        PropagationInputs(np.eye(3), np.ones((3, 2)), np.eye(3), prior)


def test_degenerate_direction_is_recorded_not_raised():
    ws = WMGSWorkspace(
        w_rows=np.array([[1.0, 1.0], [0.0, 1e-3]]),
        d_hat=DiagonalVector([1.0, 1.0]),
    )
    out = wmgs(ws, tol_orth=1e-5)
    assert len(ws.degenerate) == 1
    event = ws.degenerate[0]
    assert (event.row, event.direction) == (0, 1)
    assert event.norm == pytest.approx(1e-6)
    assert out.u[0, 1] == 0.0


def test_negative_d_hat_raises():
    ws = WMGSWorkspace(w_rows=np.eye(2), d_hat=DiagonalVector([1.0, -1.0]))
    with pytest.raises(NotPositiveDefiniteError):
        wmgs(ws)


def test_roundoff_negative_d_hat_is_read_as_zero():
    ws = WMGSWorkspace(w_rows=np.eye(2), d_hat=DiagonalVector([1.0, -1.8e-15]))
    out = wmgs(ws)
    assert ws.clamped == [(1, -1.8e-15)]
    np.testing.assert_array_equal(out.d.values, [1.0, 0.0])


def test_no_process_noise_channels(random_spd):
    prior = udu_decompose(random_spd(3))
    f = np.diag([1.0, 0.5, 2.0])
    out = propagate_factors(PropagationInputs(f, np.zeros((3, 0)), np.zeros((0, 0)), prior))
    assert rel_err(out.covariance(), f @ prior.covariance() @ f.T) <= TOL_PROPAGATION
