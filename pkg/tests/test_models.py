"""Factorization machine, cross-entropy, analytic gradients, Adam."""
import math

import numpy as np
import pytest

from conftest import flatten_params, max_relative_error, numerical_gradient

from cvrdebias.errors import TrainingError
from cvrdebias.models import (AdamState, FMGradients, FMParams, adam_update,
                              cross_entropy, fm_gradients, fm_predict,
                              load_checkpoint, save_checkpoint)


def zeroed_fm(num_users=3, num_items=4, k=2):
    params = FMParams.init(num_users, num_items, k, seed=0)
    params.V[:] = 0.0
    return params


class TestFmPredict:
    def test_all_zero_parameters_give_half(self):
        params = zeroed_fm()
        assert fm_predict(params, 0, 0) == 0.5
        assert fm_predict(params, 2, 3) == 0.5

    def test_unit_factor_inner_product(self):
        params = zeroed_fm(2, 2, 2)
        params.V[0] = [1.0, 0.0]       # user 0
        params.V[2] = [1.0, 0.0]       # item 0
        assert fm_predict(params, 0, 0) == pytest.approx(1 / (1 + math.exp(-1)))
        assert fm_predict(params, 0, 1) == 0.5

    def test_zero_padding_extra_dims_changes_nothing(self, rng):
        params = FMParams.init(5, 6, 3, seed=7)
        padded = FMParams(5, 6, params.w0, params.w.copy(),
                          np.hstack([params.V, np.zeros((params.V.shape[0], 4))]))
        u = rng.integers(0, 5, size=30)
        i = rng.integers(0, 6, size=30)
        np.testing.assert_array_equal(params.predict(u, i), padded.predict(u, i))

    def test_index_out_of_range(self):
        params = zeroed_fm()
        with pytest.raises(TrainingError):
            fm_predict(params, 3, 0)
        with pytest.raises(TrainingError):
            fm_predict(params, 0, 4)


class TestCrossEntropy:
    def test_half_half_is_ln2(self):
        assert cross_entropy(0.5, 0.5) == pytest.approx(math.log(2), abs=1e-12)

    def test_saturated_correct_prediction_is_tiny(self):
        assert cross_entropy(1.0, 1.0 - 1e-7) <= 2e-7
        assert cross_entropy(0.0, 1e-7) <= 2e-7

    def test_clamping_keeps_values_finite(self):
        assert np.isfinite(cross_entropy(1.0, 0.0))
        assert np.isfinite(cross_entropy(0.0, 1.0))

    def test_minimized_at_matching_prediction(self):
        # Gibbs: CE(q, .) over a prediction grid is smallest at pred = q
        preds = np.linspace(0.01, 0.99, 99)
        for q in (0.1, 0.37, 0.5, 0.82):
            values = cross_entropy(q, preds)
            assert abs(preds[np.argmin(values)] - q) < 0.011


class TestFmGradients:
    def test_zero_gradient_at_perfect_fit(self):
        params = zeroed_fm(2, 2, 2)
        users, items = np.array([0, 1]), np.array([0, 1])
        labels = params.predict(users, items)
        loss, grads = fm_gradients(params, users, items, [1.0, 1.0], labels)
        assert grads.g_w0 == 0.0
        np.testing.assert_array_equal(grads.g_w, 0.0)
        np.testing.assert_array_equal(grads.g_V, 0.0)

    def test_hand_value_weighted_single_example(self):
        # label 1, pred 0.5, weight 2 -> logit gradient -1 on every active slot
        params = zeroed_fm(2, 2, 2)
        params.V[:] = [[0.5, 0.0]] * 4
        _, grads = fm_gradients(params, [0], [1], [2.0], [1.0])
        # logit = V_u . V_i = 0.25, pred = sigmoid(0.25)
        pred = 1 / (1 + math.exp(-0.25))
        d = 2.0 * (pred - 1.0)
        assert grads.g_w0 == pytest.approx(d)
        assert grads.g_w[0] == pytest.approx(d)
        assert grads.g_w[3] == pytest.approx(d)
        np.testing.assert_allclose(grads.g_V[0], d * params.V[3])

    def test_matches_finite_differences(self, rng):
        for trial in range(25):
            params = FMParams.init(3, 4, 2, seed=trial)
            params.w0 = rng.normal() * 0.3
            params.w[:] = rng.normal(size=params.w.shape) * 0.3
            params.V[:] = rng.normal(size=params.V.shape) * 0.3
            n = int(rng.integers(1, 8))
            users = rng.integers(0, 3, size=n)
            items = rng.integers(0, 4, size=n)
            weights = rng.uniform(-2, 4, size=n)
            labels = rng.uniform(0, 1, size=n)
            l2 = float(rng.choice([0.0, 0.01]))
            _, grads = fm_gradients(params, users, items, weights, labels, l2=l2)
            analytic = np.concatenate([[grads.g_w0], grads.g_w, grads.g_V.ravel()])

            def loss_fn(p):
                value, _ = fm_gradients(p, users, items, weights, labels, l2=l2)
                return value

            numeric = numerical_gradient(loss_fn, params)
            assert max_relative_error(analytic, numeric) < 1e-4


class TestAdamUpdate:
    def test_zero_gradient_is_a_fixed_point_from_fresh_state(self):
        params = FMParams.init(2, 2, 2, seed=4)
        before = flatten_params(params).copy()
        state = AdamState.for_params(params)
        zero = FMGradients.zeros_like(params)
        adam_update(state, params, zero)
        np.testing.assert_array_equal(flatten_params(params), before)

    def test_moments_decay_after_gradient_stops(self):
        params = FMParams.init(2, 2, 2, seed=4)
        state = AdamState.for_params(params)
        g = FMGradients(1.0, np.ones_like(params.w), np.ones_like(params.V))
        adam_update(state, params, g)
        m_before = state.m_w0
        zero = FMGradients.zeros_like(params)
        for _ in range(10):
            adam_update(state, params, zero)
        assert abs(state.m_w0) < abs(m_before) * 0.5

    def test_constant_gradient_step_approaches_learning_rate(self):
        params = FMParams.init(2, 2, 2, seed=4)
        state = AdamState.for_params(params, learning_rate=0.01)
        g = FMGradients(3.0, np.full_like(params.w, 3.0), np.full_like(params.V, 3.0))
        for _ in range(300):
            adam_update(state, params, g)
        w0_before = params.w0
        adam_update(state, params, g)
        step = params.w0 - w0_before
        assert step == pytest.approx(-0.01, rel=1e-3)

    def test_bitwise_deterministic(self):
        runs = []
        for _ in range(2):
            params = FMParams.init(3, 3, 4, seed=9)
            state = AdamState.for_params(params)
            rng = np.random.default_rng(5)
            for _ in range(20):
                g = FMGradients(rng.normal(),
                                rng.normal(size=params.w.shape),
                                rng.normal(size=params.V.shape))
                adam_update(state, params, g)
            runs.append(flatten_params(params))
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_shape_mismatch_raises(self):
        params = FMParams.init(2, 2, 2, seed=0)
        state = AdamState.for_params(FMParams.init(3, 3, 2, seed=0))
        with pytest.raises(TrainingError):
            adam_update(state, params, FMGradients.zeros_like(params))


class TestCheckpointRoundTrip:
    def test_params_and_state_survive(self, tmp_path):
        params = FMParams.init(4, 5, 3, seed=2)
        state = AdamState.for_params(params, learning_rate=0.002)
        g = FMGradients(0.3, np.full_like(params.w, -.2), np.full_like(params.V, .1))
        for _ in range(3):
            adam_update(state, params, g)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, state, extra={"method": "naive"})
        loaded, lstate, header = load_checkpoint(path)
        assert header["method"] == "naive"
        assert lstate.step == 3
        np.testing.assert_array_equal(flatten_params(loaded), flatten_params(params))
        np.testing.assert_array_equal(lstate.m_V, state.m_V)
        np.testing.assert_array_equal(lstate.v_w, state.v_w)

    def test_params_only(self, tmp_path):
        params = FMParams.init(2, 2, 2, seed=1)
        path = tmp_path / "p.ckpt"
        save_checkpoint(path, params)
        loaded, lstate, _ = load_checkpoint(path)
        assert lstate is None
        np.testing.assert_array_equal(flatten_params(loaded), flatten_params(params))
