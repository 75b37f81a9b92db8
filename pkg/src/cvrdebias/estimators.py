"""Counterfactual loss estimators over a user x item grid.

Five scalar estimates of the ideal (fully observed) cross-entropy loss:
naive, error-imputation (EIB), inverse-propensity (IPS), doubly robust
(DR), and DR with variance-optimized imputation (MRDR; same loss formula,
different imputed errors).  Also the analytic bias/variance oracles for DR
and IPS and the relative-error metric.

Normalization: the naive/EIB/IPS estimators are printed with a 1/|clicked|
factor while ideal/DR use 1/|universe|.  Both normalizers are supported via
the ``normalizer`` argument ("clicked" or "universe"); defaults follow the
printed formulas.  The semi-synthetic benchmark overrides EIB/IPS to
"universe" (see cli module), which is the scale that reproduces the
published estimator comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimatorError
from .models import cross_entropy

# Estimated propensities are clamped below at this floor before division.
PROPENSITY_FLOOR = 1e-4

_CHUNK = 1 << 20


def stable_sum(values) -> float:
    """Sum in extended precision with a compensated reduction.

    Chunk partials are accumulated in 80-bit long double via Kahan
    summation; worth it because universes reach ~1.5e7 cells.
    """
    flat = np.asarray(values).ravel()
    total = np.longdouble(0.0)
    comp = np.longdouble(0.0)
    for start in range(0, flat.size, _CHUNK):
        part = np.sum(flat[start:start + _CHUNK], dtype=np.longdouble)
        y = part - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return float(total)


def _as_float(x):
    return np.asarray(x, dtype=np.float64)


def floored(p_hat, floor=PROPENSITY_FLOOR):
    """Propensities clamped below before any division."""
    return np.maximum(_as_float(p_hat), floor)


@dataclass
class LossInputs:
    """Aligned dense matrices feeding the estimators.

    clicks: binary click indicators O.
    conversions: labels R; must be valid wherever an estimator reads them
        (everywhere for the synthetic benchmark, clicked cells for logs).
    predicted_cvr: predicted conversion rates, clamped on use.
    propensities: estimated propensities p-hat, clamped at the floor.
    imputed_errors: imputed per-cell errors (EIB/DR/MRDR only).
    """

    clicks: np.ndarray
    conversions: np.ndarray
    predicted_cvr: np.ndarray
    propensities: np.ndarray | None = None
    imputed_errors: np.ndarray | None = None

    def errors(self):
        return cross_entropy(self.conversions, self.predicted_cvr)

    def num_clicked(self):
        return stable_sum(self.clicks)

    def universe(self):
        return float(np.asarray(self.clicks).size)


def _normalizer_count(inputs: LossInputs, normalizer: str) -> float:
    if normalizer == "clicked":
        n = inputs.num_clicked()
        if n < 1:
            raise EstimatorError("no clicked events to normalize by")
        return n
    if normalizer == "universe":
        return inputs.universe()
    raise EstimatorError(f"unknown normalizer {normalizer!r}")


def ideal_loss(conversions, predicted_cvr) -> float:
    """Mean cross-entropy over the whole universe (needs full labels)."""
    e = cross_entropy(_as_float(conversions), _as_float(predicted_cvr))
    return stable_sum(e) / e.size


def naive_loss(inputs: LossInputs, normalizer="clicked") -> float:
    """Average error over clicked events only (biased under MNAR)."""
    o = _as_float(inputs.clicks)
    e = inputs.errors()
    return stable_sum(o * e) / _normalizer_count(inputs, normalizer)


def eib_loss(inputs: LossInputs, normalizer="clicked") -> float:
    """True errors on clicked cells, imputed errors on the rest."""
    if inputs.imputed_errors is None:
        raise EstimatorError("EIB needs imputed errors on unclicked cells")
    o = _as_float(inputs.clicks)
    e = inputs.errors()
    eh = _as_float(inputs.imputed_errors)
    return stable_sum(o * e + (1.0 - o) * eh) / _normalizer_count(inputs, normalizer)


def ips_loss(inputs: LossInputs, normalizer="clicked", floor=PROPENSITY_FLOOR) -> float:
    """Clicked errors inversely weighted by estimated propensity."""
    if inputs.propensities is None:
        raise EstimatorError("IPS needs estimated propensities")
    o = _as_float(inputs.clicks)
    e = inputs.errors()
    ph = floored(inputs.propensities, floor)
    return stable_sum(o * e / ph) / _normalizer_count(inputs, normalizer)


def dr_loss(inputs: LossInputs, floor=PROPENSITY_FLOOR) -> float:
    """Imputed errors everywhere plus propensity-weighted correction on
    clicked cells; normalized over the universe."""
    if inputs.propensities is None or inputs.imputed_errors is None:
        raise EstimatorError("DR needs propensities and imputed errors")
    o = _as_float(inputs.clicks)
    e = inputs.errors()
    eh = _as_float(inputs.imputed_errors)
    ph = floored(inputs.propensities, floor)
    return stable_sum(eh + o * (e - eh) / ph) / inputs.universe()


def dr_bias(true_propensities, est_propensities, errors, imputed_errors,
            floor=PROPENSITY_FLOOR) -> float:
    """|sum of (1 - p/p-hat) * (e - e-hat)| / universe size.

    Needs the true propensities, so synthetic worlds only.
    """
    p = _as_float(true_propensities)
    ph = floored(est_propensities, floor)
    delta = _as_float(errors) - _as_float(imputed_errors)
    return abs(stable_sum((1.0 - p / ph) * delta)) / p.size


def dr_variance(true_propensities, est_propensities, errors, imputed_errors,
                floor=PROPENSITY_FLOOR) -> float:
    """Click-resampling variance of the DR estimate (analytic form)."""
    p = _as_float(true_propensities)
    ph = floored(est_propensities, floor)
    delta = _as_float(errors) - _as_float(imputed_errors)
    return stable_sum(p * (1.0 - p) / ph ** 2 * delta ** 2) / p.size ** 2


def ips_variance(true_propensities, est_propensities, errors,
                 floor=PROPENSITY_FLOOR) -> float:
    """Click-resampling variance of the universe-normalized IPS estimate."""
    p = _as_float(true_propensities)
    ph = floored(est_propensities, floor)
    e = _as_float(errors)
    return stable_sum(p * (1.0 - p) / ph ** 2 * e ** 2) / p.size ** 2


def relative_error(ideal: float, estimated: float) -> float:
    """|ideal - estimated| / ideal; the accuracy of a loss estimate."""
    if ideal <= 0 or not math.isfinite(ideal):
        raise EstimatorError(f"relative error undefined for ideal loss {ideal}")
    return abs(ideal - estimated) / ideal


ESTIMATOR_NAMES = ("naive", "eib", "ips", "dr", "mrdr")


@dataclass
class EstimateReport:
    """Per-estimator summary across sampled worlds for one benchmark cell."""

    setting: str
    estimator: str
    loss: float
    ideal: float
    re_mean: float
    re_std: float
    analytic_bias: float
    analytic_variance: float
    n_seeds: int

    CSV_COLUMNS = ("setting", "estimator", "loss", "ideal", "RE",
                   "analytic_bias", "analytic_variance", "n_seeds", "re_std")

    def csv_row(self):
        return (self.setting, self.estimator, self.loss, self.ideal,
                self.re_mean, self.analytic_bias, self.analytic_variance,
                self.n_seeds, self.re_std)
