"""Shared test helpers: small random worlds and finite-difference checks."""
import numpy as np
import pytest

from cvrdebias.models import FMParams


def flatten_params(params: FMParams):
    return np.concatenate([[params.w0], params.w, params.V.ravel()])


def unflatten_into(params: FMParams, vec):
    n = params.w.size
    params.w0 = float(vec[0])
    params.w[:] = vec[1:1 + n]
    params.V[:] = vec[1 + n:].reshape(params.V.shape)


def numerical_gradient(loss_fn, params: FMParams, step=1e-5):
    """Central finite differences of loss_fn(params) over every coordinate."""
    base = flatten_params(params)
    grad = np.zeros_like(base)
    work = params.copy()
    for j in range(base.size):
        for sign in (1.0, -1.0):
            vec = base.copy()
            vec[j] += sign * step
            unflatten_into(work, vec)
            grad[j] += sign * loss_fn(work)
    return grad / (2.0 * step)


def max_relative_error(analytic, numerical, scale_floor=1e-6):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numerical)), scale_floor)
    return float(np.max(np.abs(analytic - numerical) / denom))


def random_world(rng, shape=(20, 20), exact_propensities=False):
    """Random (p, p_hat, e, e_hat) matrices for estimator oracles."""
    p = rng.uniform(0.05, 0.9, size=shape)
    p_hat = p if exact_propensities else np.clip(
        p * rng.uniform(0.6, 1.6, size=shape), 0.02, 1.0)
    e = rng.uniform(0.0, 2.0, size=shape)
    e_hat = rng.uniform(0.0, 2.0, size=shape)
    return p, p_hat, e, e_hat


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
