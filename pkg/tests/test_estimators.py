"""Loss estimators: hand values, limits, and Monte-Carlo oracles."""
import math

import numpy as np
import pytest

from conftest import random_world

from cvrdebias.errors import EstimatorError
from cvrdebias.estimators import (LossInputs, dr_bias, dr_loss, dr_variance,
                                  eib_loss, ideal_loss, ips_loss,
                                  ips_variance, naive_loss, relative_error,
                                  stable_sum)


def inputs_with_errors(O, e, propensities=None, imputed=None):
    """LossInputs whose cross-entropy errors equal e exactly.

    Uses labels 1 and predictions exp(-e), so CE(1, exp(-e)) = e.
    """
    e = np.asarray(e, dtype=np.float64)
    return LossInputs(np.asarray(O, dtype=np.float64), np.ones_like(e),
                      np.exp(-e), propensities=propensities,
                      imputed_errors=imputed)


class TestIdealLoss:
    def test_perfect_clamped_prediction_is_near_zero(self):
        R = np.array([[0, 1], [1, 0]], dtype=float)
        R_hat = np.where(R > 0, 1 - 1e-7, 1e-7)
        assert ideal_loss(R, R_hat) <= 2e-7

    def test_hand_value_1x2(self):
        # R=(1,0), R_hat=(0.5,0.5) -> ln 2
        assert ideal_loss([[1, 0]], [[0.5, 0.5]]) == pytest.approx(math.log(2))

    def test_constant_half_prediction_is_ln2(self, rng):
        R = rng.integers(0, 2, size=(13, 7)).astype(float)
        assert ideal_loss(R, np.full_like(R, 0.5)) == pytest.approx(math.log(2))


class TestNaiveLoss:
    def test_all_clicked_equals_ideal(self, rng):
        R = rng.integers(0, 2, size=(6, 5)).astype(float)
        R_hat = rng.uniform(0.05, 0.95, size=R.shape)
        inputs = LossInputs(np.ones_like(R), R, R_hat)
        assert naive_loss(inputs) == pytest.approx(ideal_loss(R, R_hat))

    def test_hand_value_diagonal_clicks(self):
        e = np.array([[0.2, 0.4], [0.6, 0.8]])
        assert naive_loss(inputs_with_errors(np.eye(2), e)) == pytest.approx(0.5)

    def test_zero_clicks_raises(self):
        inputs = inputs_with_errors(np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(EstimatorError):
            naive_loss(inputs)


class TestEibLoss:
    def test_all_clicked_with_matching_imputation_equals_naive(self, rng):
        e = rng.uniform(0.1, 1.0, size=(4, 4))
        inputs = inputs_with_errors(np.ones_like(e), e, imputed=e.copy())
        assert eib_loss(inputs) == pytest.approx(naive_loss(inputs))

    def test_hand_value_printed_normalization(self):
        # 1x2 world, O=(1,0), e=(0.4,.), e_hat=(.,0.6) -> (0.4+0.6)/1 = 1.0
        inputs = inputs_with_errors([[1, 0]], [[0.4, 123.0]],
                                    imputed=np.array([[9.0, 0.6]]))
        assert eib_loss(inputs, normalizer="clicked") == pytest.approx(1.0)
        assert eib_loss(inputs, normalizer="universe") == pytest.approx(0.5)

    def test_missing_imputation_raises(self):
        with pytest.raises(EstimatorError):
            eib_loss(inputs_with_errors(np.eye(2), np.ones((2, 2))))


class TestIpsLoss:
    def test_unit_propensity_equals_naive(self, rng):
        e = rng.uniform(0.1, 1.0, size=(5, 3))
        O = (rng.random(e.shape) < 0.5).astype(float)
        O[0, 0] = 1.0
        inputs = inputs_with_errors(O, e, propensities=np.ones_like(e))
        assert ips_loss(inputs) == pytest.approx(naive_loss(inputs))

    def test_hand_value(self):
        e = np.array([[0.2, 0.4], [0.6, 0.8]])
        inputs = inputs_with_errors(np.eye(2), e,
                                    propensities=np.full((2, 2), 0.5))
        assert ips_loss(inputs) == pytest.approx(1.0)
        assert ips_loss(inputs, normalizer="universe") == pytest.approx(0.5)

    def test_propensity_floor_bounds_the_weight(self):
        e = np.ones((1, 2))
        inputs = inputs_with_errors([[1, 1]], e,
                                    propensities=np.array([[1e-12, 1.0]]))
        value = ips_loss(inputs, floor=1e-4)
        assert value == pytest.approx((1e4 + 1.0) / 2)


class TestDrLoss:
    def test_exact_imputation_recovers_ideal_for_any_clicks(self, rng):
        R = rng.integers(0, 2, size=(8, 6)).astype(float)
        R_hat = rng.uniform(0.05, 0.95, size=R.shape)
        e = -R * np.log(R_hat) - (1 - R) * np.log1p(-R_hat)
        for _ in range(5):
            O = (rng.random(R.shape) < rng.uniform(0.2, 0.8)).astype(float)
            inputs = LossInputs(O, R, R_hat,
                                propensities=rng.uniform(0.1, 1.0, size=R.shape),
                                imputed_errors=e.copy())
            assert dr_loss(inputs) == pytest.approx(ideal_loss(R, R_hat))

    def test_hand_value(self):
        e = np.array([[0.2, 0.4], [0.6, 0.8]])
        e_hat = np.array([[0.1, 0.3], [0.5, 0.7]])
        inputs = inputs_with_errors(np.eye(2), e,
                                    propensities=np.full((2, 2), 0.5),
                                    imputed=e_hat)
        assert dr_loss(inputs) == pytest.approx(0.5)

    def test_everything_coincides_under_full_observation(self, rng):
        R = rng.integers(0, 2, size=(4, 4)).astype(float)
        R_hat = rng.uniform(0.1, 0.9, size=R.shape)
        e = -R * np.log(R_hat) - (1 - R) * np.log1p(-R_hat)
        inputs = LossInputs(np.ones_like(R), R, R_hat,
                            propensities=np.ones_like(R), imputed_errors=e)
        ideal = ideal_loss(R, R_hat)
        for value in (naive_loss(inputs), eib_loss(inputs), ips_loss(inputs),
                      dr_loss(inputs)):
            assert value == pytest.approx(ideal)


class TestAnalyticOracles:
    def test_bias_zero_when_propensities_exact(self, rng):
        p, _, e, e_hat = random_world(rng, exact_propensities=True)
        assert dr_bias(p, p, e, e_hat) == pytest.approx(0.0, abs=1e-15)

    def test_bias_zero_when_imputation_exact(self, rng):
        p, p_hat, e, _ = random_world(rng)
        assert dr_bias(p, p_hat, e, e.copy()) == pytest.approx(0.0, abs=1e-15)

    def test_variance_hand_value_single_cell(self):
        one = np.array([[0.5]])
        assert dr_variance(one, one, np.array([[1.5]]), np.array([[0.5]])) \
            == pytest.approx(1.0)

    def test_variance_zero_at_exact_imputation(self, rng):
        p, p_hat, e, _ = random_world(rng)
        assert dr_variance(p, p_hat, e, e.copy()) == 0.0

    def test_dr_variance_dominated_by_ips_in_the_safe_band(self, rng):
        # 0 <= e_hat <= 2e cellwise implies (e - e_hat)^2 <= e^2 per cell
        for _ in range(20):
            p, p_hat, e, _ = random_world(rng)
            e_hat = e * rng.uniform(0.0, 2.0, size=e.shape)
            assert dr_variance(p, p_hat, e, e_hat) <= ips_variance(p, p_hat, e) + 1e-18


class TestMonteCarloOracles:
    """Small-scale resampling checks; the acceptance suite runs the full sizes."""

    def _resample(self, rng, p, n):
        return (rng.random((n,) + p.shape) < p).astype(float)

    def test_dr_and_ips_unbiased_with_exact_propensities(self):
        rng = np.random.default_rng(77)
        p, _, e, e_hat = random_world(rng, shape=(10, 10), exact_propensities=True)
        R_hat = np.exp(-e)
        R = np.ones_like(e)
        ideal = ideal_loss(R, R_hat)
        n = 4000
        draws = self._resample(rng, p, n)
        dr_vals = np.array([
            dr_loss(LossInputs(O, R, R_hat, propensities=p, imputed_errors=e_hat))
            for O in draws])
        ips_vals = np.array([
            ips_loss(LossInputs(O, R, R_hat, propensities=p), normalizer="universe")
            for O in draws])
        for vals in (dr_vals, ips_vals):
            se = vals.std(ddof=1) / math.sqrt(n)
            assert abs(vals.mean() - ideal) < 3 * se

    def test_empirical_variance_matches_formula(self):
        rng = np.random.default_rng(321)
        p, p_hat, e, e_hat = random_world(rng, shape=(10, 10))
        R_hat = np.exp(-e)
        R = np.ones_like(e)
        n = 20000
        draws = self._resample(rng, p, n)
        vals = np.array([
            dr_loss(LossInputs(O, R, R_hat, propensities=p_hat, imputed_errors=e_hat))
            for O in draws])
        expected = dr_variance(p, p_hat, e, e_hat)
        assert vals.var(ddof=1) == pytest.approx(expected, rel=0.05)

    def test_dr_bias_formula_against_resampling(self):
        rng = np.random.default_rng(9)
        p, p_hat, e, e_hat = random_world(rng, shape=(10, 10))
        R_hat = np.exp(-e)
        R = np.ones_like(e)
        ideal = ideal_loss(R, R_hat)
        n = 20000
        draws = self._resample(rng, p, n)
        vals = np.array([
            dr_loss(LossInputs(O, R, R_hat, propensities=p_hat, imputed_errors=e_hat))
            for O in draws])
        se = vals.std(ddof=1) / math.sqrt(n)
        expected = dr_bias(p, p_hat, e, e_hat)
        assert abs(abs(vals.mean() - ideal) - expected) < 3 * se


class TestRelativeError:
    def test_exact_estimate_is_zero(self):
        assert relative_error(0.7, 0.7) == 0.0

    def test_hand_value(self):
        assert relative_error(0.5, 0.45) == pytest.approx(0.1)

    def test_zero_ideal_rejected(self):
        with pytest.raises(EstimatorError):
            relative_error(0.0, 0.3)


class TestStableSum:
    def test_matches_fsum_on_mixed_magnitudes(self, rng):
        scales = rng.choice([1e-8, 1e-3, 1.0, 1e3, 1e8], size=2_000_000)
        values = rng.normal(size=2_000_000) * scales
        assert stable_sum(values) == pytest.approx(math.fsum(values), rel=1e-12)

    def test_chunked_reduction(self):
        values = np.ones(3_000_001)
        assert stable_sum(values) == 3_000_001.0
