"""Click-through-rate model used as the propensity estimate.

A factorization machine is fit on click indicators: every clicked cell is a
positive and, per epoch, a seeded uniform draw of ``negative_ratio`` times
as many unclicked cells provides the negatives.  Early stopping watches
log-loss on a held-out click split.  Scoring clamps below at a floor so
inverse-propensity weights stay bounded; the trained model is frozen before
any conversion model sees it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .datasets import ConversionDataset
from .errors import TrainingError
from .models import (AdamState, FMParams, adam_update, cross_entropy,
                     fm_gradients)

logger = logging.getLogger(__name__)


@dataclass
class PropensityConfig:
    embedding_dim: int = 64
    learning_rate: float = 0.001
    batch_size: int = 1024
    negative_ratio: int = 4
    l2: float = 1e-5
    clamp_floor: float = 1e-3
    valid_fraction: float = 0.1
    patience: int = 5
    max_epochs: int = 50
    seed: int = 0


@dataclass
class PropensityModel:
    """Frozen CTR scorer.

    ``logit_offset`` removes the class-prior shift that negative sampling
    introduces (odds are scaled by ratio * p_e / (1 - p_e)), so the scores
    are calibrated to the universe click rate rather than to the 1:ratio
    sampled mix.
    """

    fm: FMParams
    clamp_floor: float
    negative_ratio: int
    logit_offset: float = 0.0

    def propensity(self, users, items):
        """Predicted click probability clamped to [clamp_floor, 1]."""
        from .models import sigmoid
        raw = sigmoid(self.fm.logits(users, items) + self.logit_offset)
        return np.maximum(raw, self.clamp_floor)

    def propensity_matrix(self):
        from .models import sigmoid
        Vu = self.fm.V[: self.fm.num_users]
        Vi = self.fm.V[self.fm.num_users:]
        logits = (self.fm.w0 + self.fm.w[: self.fm.num_users][:, None]
                  + self.fm.w[self.fm.num_users:][None, :] + Vu @ Vi.T)
        return np.maximum(sigmoid(logits + self.logit_offset), self.clamp_floor)


def propensity_of(model: PropensityModel, user, item) -> float:
    return float(model.propensity(np.atleast_1d(user), np.atleast_1d(item))[0])


class UnclickedSampler:
    """Uniform draws from the complement of a click support."""

    def __init__(self, clicked_keys, num_users, num_items):
        self.keys = np.sort(np.asarray(clicked_keys, dtype=np.int64))
        self.universe = num_users * num_items
        self.num_items = num_items
        self.n_unclicked = self.universe - self.keys.size
        if self.n_unclicked <= 0:
            raise TrainingError("no unclicked cells to sample from")

    def _is_clicked(self, keys):
        idx = np.searchsorted(self.keys, keys)
        idx = np.minimum(idx, self.keys.size - 1)
        return self.keys[idx] == keys

    def draw(self, count, rng):
        """``count`` unclicked cells as (users, items); rejection sampling."""
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            need = count - filled
            # oversample to cover the expected rejection rate
            factor = 1.0 / max(self.n_unclicked / self.universe, 1e-9)
            cand = rng.integers(0, self.universe, size=int(need * factor) + 16)
            cand = cand[~self._is_clicked(cand)]
            take = min(cand.size, need)
            out[filled:filled + take] = cand[:take]
            filled += take
        return out // self.num_items, out % self.num_items


def train_ctr(clicks: ConversionDataset, config: PropensityConfig | None = None) -> PropensityModel:
    """Fit the CTR factorization machine on a click support.

    Positives are all clicked cells; negatives are redrawn every epoch.
    Returns the model from the best validation epoch.
    """
    config = config or PropensityConfig()
    n_pos = len(clicks)
    if n_pos == 0:
        raise TrainingError("no clicked cells to train a CTR model on")
    sampler = UnclickedSampler(clicks.pair_keys(), clicks.num_users, clicks.num_items)

    seq = np.random.SeedSequence(config.seed)
    rng_split, rng_neg, rng_shuffle, rng_init = (
        np.random.default_rng(s) for s in seq.spawn(4))

    params = FMParams.init(clicks.num_users, clicks.num_items,
                           config.embedding_dim,
                           seed=rng_init.integers(2 ** 31))
    state = AdamState.for_params(params, config.learning_rate)

    order = rng_split.permutation(n_pos)
    n_valid = max(1, int(n_pos * config.valid_fraction)) if n_pos > 1 else 0
    valid_idx, train_idx = order[:n_valid], order[n_valid:]
    if train_idx.size == 0:
        train_idx, valid_idx = order, order
    vu, vi = clicks.users[valid_idx], clicks.items[valid_idx]
    nvu, nvi = sampler.draw(config.negative_ratio * max(vu.size, 1), rng_neg)
    val_users = np.concatenate([vu, nvu])
    val_items = np.concatenate([vi, nvi])
    val_labels = np.concatenate([np.ones(vu.size), np.zeros(nvu.size)])

    def valid_logloss():
        return float(np.mean(cross_entropy(val_labels,
                                           params.predict(val_users, val_items))))

    best = np.inf
    best_params = params.copy()
    stall = 0
    tu, ti = clicks.users[train_idx], clicks.items[train_idx]
    for epoch in range(config.max_epochs):
        nu, ni = sampler.draw(config.negative_ratio * tu.size, rng_neg)
        eu = np.concatenate([tu, nu])
        ei = np.concatenate([ti, ni])
        ey = np.concatenate([np.ones(tu.size), np.zeros(nu.size)])
        perm = rng_shuffle.permutation(eu.size)
        for start in range(0, eu.size, config.batch_size):
            sel = perm[start:start + config.batch_size]
            loss, grads = fm_gradients(params, eu[sel], ei[sel],
                                       np.ones(sel.size), ey[sel], l2=config.l2)
            if not np.isfinite(loss):
                raise TrainingError(f"CTR training diverged at epoch {epoch}")
            adam_update(state, params, grads)
        score = valid_logloss()
        if score < best - 1e-12:
            best = score
            best_params = params.copy()
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break
    logger.info("CTR model: best held-out logloss %.4f", best)
    p_e = n_pos / (clicks.num_users * clicks.num_items)
    offset = float(np.log(config.negative_ratio * p_e / (1.0 - p_e)))
    return PropensityModel(best_params, config.clamp_floor,
                           config.negative_ratio, logit_offset=offset)


def save_propensity(path, model: PropensityModel):
    """FM checkpoint plus clamp/offset metadata in the header."""
    from .models import save_checkpoint
    save_checkpoint(path, model.fm, extra={
        "kind": "propensity", "clamp_floor": model.clamp_floor,
        "negative_ratio": model.negative_ratio,
        "logit_offset": model.logit_offset})


def load_propensity(path) -> PropensityModel:
    from .models import load_checkpoint
    params, _, header = load_checkpoint(path)
    if header.get("kind") != "propensity":
        raise TrainingError(f"{path} is not a propensity checkpoint")
    return PropensityModel(params, float(header["clamp_floor"]),
                           int(header["negative_ratio"]),
                           float(header["logit_offset"]))
