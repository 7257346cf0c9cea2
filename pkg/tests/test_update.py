import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from core.errors import (
    DimensionError,
    NegativePriorDError,
    NonFiniteError,
    ZeroInnovationVarianceError,
    ZeroPivotError,
)
from core.factorization import UDFactors, udu_decompose
from core.update import (
    RankOneInputs,
    ScalarMeasurement,
    direct_ud_update,
    modified_agee_turner,
    standard_agee_turner,
)

from . import TOL_ALPHA, TOL_CROSS, TOL_RANK_ONE, TOL_UPDATE, rel_err


def dense_update(p, h, r):
    ph = p @ h
    s = float(h @ ph) + r
    return p - np.outer(ph, ph) / s, ph / s, s


# ── Modified Agee-Turner ──────────────────────────────────────────────────────

@pytest.mark.parametrize("n", [1, 2, 3, 6, 10])
def test_modified_agee_turner_matches_dense(random_spd, rng, n):
    p = random_spd(n)
    h = rng.standard_normal(n)
    r = 0.3
    prior = udu_decompose(p)
    res = modified_agee_turner(prior, ScalarMeasurement(h, r, 1.5, 0.5))

    expected_p, expected_k, s = dense_update(p, h, r)
    assert rel_err(res.factors.covariance(), expected_p) <= TOL_UPDATE
    assert rel_err(res.gain, expected_k) <= TOL_UPDATE
    # the gain scale a_i is 1 / α_n with α_n the innovation variance
    assert abs(res.innovation_variance - s) / s <= TOL_ALPHA
    assert res.innovation == pytest.approx(1.0)
    assert np.all(res.factors.d.values >= 0.0)


def test_alpha_sequence_is_non_decreasing(random_spd, rng):
    res = modified_agee_turner(udu_decompose(random_spd(6)), ScalarMeasurement(rng.standard_normal(6), 0.1, 0.0, 0.0))
    alpha = res.scratch.alpha
    assert alpha[0] >= 0.1
    assert np.all(np.diff(alpha) >= 0.0)
    assert alpha[-1] == res.innovation_variance


def test_perfect_measurement():
    res = modified_agee_turner(UDFactors.identity(2), ScalarMeasurement([1.0, 0.0], 0.0, 2.0, 0.0))
    np.testing.assert_array_equal(res.gain, [1.0, 0.0])
    np.testing.assert_array_equal(res.factors.d.values, [0.0, 1.0])
    np.testing.assert_array_equal(res.factors.covariance(), np.diag([0.0, 1.0]))


def test_unobservable_noise_free_measurement_raises():
    prior = UDFactors.from_arrays(np.eye(2), [1.0, 0.0])
    with pytest.raises(ZeroInnovationVarianceError):
        modified_agee_turner(prior, ScalarMeasurement([0.0, 1.0], 0.0, 0.0, 0.0))
    with pytest.raises(ZeroInnovationVarianceError):
        direct_ud_update(prior, ScalarMeasurement([0.0, 1.0], 0.0, 0.0, 0.0))


def test_negative_prior_d_raises():
    prior = UDFactors.from_arrays(np.eye(3), [1.0, -1.0, 1.0])
    with pytest.raises(NegativePriorDError) as info:
        modified_agee_turner(prior, ScalarMeasurement(np.ones(3), 1.0, 0.0, 0.0))
    assert info.value.index == 1


def test_roundoff_negative_prior_is_read_as_zero():
    prior = UDFactors.from_arrays(np.eye(2), [1.0, -1e-15])
    meas = ScalarMeasurement([1.0, 1.0], 1.0, 0.0, 0.0)
    expected, _, _ = dense_update(np.diag([1.0, 0.0]), np.array([1.0, 1.0]), 1.0)
    for update in (modified_agee_turner, direct_ud_update):
        res = update(prior, meas)
        assert np.all(res.factors.d.values >= 0.0)
        np.testing.assert_allclose(res.factors.covariance(), expected, atol=1e-15)


def test_zero_measurement_row_changes_nothing(random_spd):
    prior = udu_decompose(random_spd(3))
    res = modified_agee_turner(prior, ScalarMeasurement(np.zeros(3), 0.4, 1.0, 0.0))
    assert np.array_equal(res.gain, np.zeros(3))
    assert res.innovation_variance == 0.4
    assert np.array_equal(res.factors.u.packed, prior.u.packed)
    np.testing.assert_allclose(res.factors.d.values, prior.d.values, rtol=1e-15)


def test_scalar_state_update():
    d, h, r = 2.0, 3.0, 1.0
    res = modified_agee_turner(UDFactors.from_arrays(np.eye(1), [d]), ScalarMeasurement([h], r, 0.0, 0.0))
    assert res.gain[0] == pytest.approx(d * h / (r + d * h * h))
    assert res.factors.d.values[0] == pytest.approx(r * d / (r + d * h * h))
    assert res.innovation_variance == pytest.approx(r + d * h * h)


def test_measurement_validation():
    with pytest.raises(NonFiniteError):
        ScalarMeasurement([1.0], 1.0, np.nan, 0.0)
    with pytest.raises(ValueError):
        ScalarMeasurement([1.0], -1.0, 0.0, 0.0)
    with pytest.raises(DimensionError):
        modified_agee_turner(UDFactors.identity(3), ScalarMeasurement([1.0, 0.0], 1.0, 0.0, 0.0))


# ── Direct UD update ──────────────────────────────────────────────────────────

@pytest.mark.parametrize("seed", range(8))
def test_direct_update_agrees_with_agee_turner(random_spd, rng, seed):
    n = 1 + seed
    prior = udu_decompose(random_spd(n))
    meas = ScalarMeasurement(rng.standard_normal(n), 0.05 + seed, 0.0, 0.0)
    at = modified_agee_turner(prior, meas)
    direct = direct_ud_update(prior, meas)
    assert rel_err(direct.factors.covariance(), at.factors.covariance()) <= TOL_CROSS
    assert rel_err(direct.gain, at.gain) <= TOL_CROSS
    assert direct.innovation_variance == pytest.approx(at.innovation_variance, rel=1e-12)


# ── Standard Agee-Turner ──────────────────────────────────────────────────────

@pytest.mark.parametrize("n", [1, 2, 4, 9])
def test_rank_one_update(random_spd, rng, n):
    factors = udu_decompose(random_spd(n))
    a = rng.standard_normal(n)
    out = standard_agee_turner(RankOneInputs(factors, 0.7, a))
    assert rel_err(out.covariance(), factors.covariance() + 0.7 * np.outer(a, a)) <= TOL_RANK_ONE


@settings(max_examples=60, deadline=None)
@given(
    d=arrays(np.float64, (5,), elements=st.floats(0.1, 10.0)),
    upper=arrays(np.float64, (5, 5), elements=st.floats(-2.0, 2.0)),
    a=arrays(np.float64, (5,), elements=st.floats(-3.0, 3.0)),
    c=st.floats(0.0, 5.0),
)
def test_rank_one_update_hypothesis(d, upper, a, c):
    factors = UDFactors.from_arrays(upper, d)
    out = standard_agee_turner(RankOneInputs(factors, c, a))
    assert rel_err(out.covariance(), factors.covariance() + c * np.outer(a, a)) <= TOL_RANK_ONE
    assert np.all(out.d.values >= d)


def test_zero_c_is_bit_exact_no_op(random_spd, rng):
    factors = udu_decompose(random_spd(6))
    out = standard_agee_turner(RankOneInputs(factors, 0.0, rng.standard_normal(6)))
    assert np.array_equal(out.u.packed, factors.u.packed)
    assert np.array_equal(out.d.values, factors.d.values)


def test_rank_one_on_semidefinite_factors():
    factors = UDFactors.from_arrays(np.eye(2), [1.0, 0.0])
    out = standard_agee_turner(RankOneInputs(factors, 1.0, [1.0, 0.0]))
    np.testing.assert_array_equal(out.covariance(), np.diag([2.0, 0.0]))


def test_rank_one_zero_pivot_raises():
    factors = UDFactors.from_arrays(np.eye(2), [1.0, 0.0])
    with pytest.raises(ZeroPivotError) as info:
        standard_agee_turner(RankOneInputs(factors, 1.0, [0.0, 1e-10]))
    assert info.value.index == 1


def test_rank_one_input_validation():
    with pytest.raises(ValueError):
        RankOneInputs(UDFactors.identity(2), -1.0, [1.0, 0.0])
    with pytest.raises(NonFiniteError):
        RankOneInputs(UDFactors.identity(2), np.inf, [1.0, 0.0])
    with pytest.raises(DimensionError):
        RankOneInputs(UDFactors.identity(2), 1.0, [1.0])
