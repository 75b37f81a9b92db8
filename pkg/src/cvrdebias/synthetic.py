"""Semi-synthetic world generation for the estimator benchmark.

Pipeline: complete an explicit-rating matrix with biased matrix
factorization, remap the completed scores onto a 1..5 marginal, turn the
discrete ratings into click probabilities and true conversion rates, then
Bernoulli-sample fully observed click/conversion worlds.  Five adversarial
predicted-CVR matrices (ONE/THREE/FIVE/SKEW/CRS), a noisy propensity mix,
and imputed-error recipes complete the benchmark inputs.

The 1..5 rating marginal is not published; RATING_MARGINAL_DEFAULT below was
calibrated so the benchmark's relative errors land on the published
magnitudes, and every report logs it.  Likewise ANCHOR_WEIGHT_* calibrate
the imputed-error accuracy for the DR/MRDR benchmark columns; the printed
pseudo-conversion-rate recipes are implemented verbatim in
:func:`heuristic_imputed_errors` (see the estimator-recipe notes in
cli.run_synth).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import EventTable, load_manifest, write_manifest
from .errors import ConfigError, GenerationError, TrainingError
from .estimators import (ESTIMATOR_NAMES, EstimateReport, LossInputs, dr_bias,
                         dr_loss, dr_variance, eib_loss, ideal_loss, ips_loss,
                         ips_variance, naive_loss, relative_error)
from .models import cross_entropy

logger = logging.getLogger(__name__)

CVR_LEVELS = np.array([0.1, 0.3, 0.5, 0.7, 0.9])

# Calibrated, non-published defaults (see module docstring).
RATING_MARGINAL_DEFAULT = (0.605, 0.15, 0.07, 0.14, 0.035)
ANCHOR_WEIGHT_DR = 0.40
ANCHOR_WEIGHT_MRDR = 0.03

PREDICTED_KINDS = ("ONE", "THREE", "FIVE", "SKEW", "CRS")
_FLIP_SOURCE = {"ONE": 0.1, "THREE": 0.3, "FIVE": 0.5}


@dataclass
class MFCompletionConfig:
    """Biased matrix-factorization settings for rating completion."""

    rank: int = 64
    epochs: int = 200
    learning_rate: float = 0.005
    l2: float = 1e-4
    batch_size: int = 4096
    seed: int = 0


def complete_ratings(events: EventTable, rank=64, epochs=200, seed=0,
                     learning_rate=0.005, l2=1e-4, batch_size=4096):
    """Complete the rating matrix with a biased MF model fit by seeded SGD.

    Model: mean + user bias + item bias + <P_u, Q_i>, squared loss on the
    observed entries.  Returns the dense m x n prediction matrix.
    """
    if len(events) == 0:
        raise TrainingError("cannot complete an empty event table")
    if rank < 1:
        raise ConfigError(f"rank must be >= 1, got {rank}")
    m, n = events.num_users, events.num_items
    rng = np.random.default_rng(seed)
    mu = float(events.ratings.mean())
    bu = np.zeros(m)
    bi = np.zeros(n)
    P = rng.normal(0.0, 0.1, size=(m, rank)) / np.sqrt(rank)
    Q = rng.normal(0.0, 0.1, size=(n, rank)) / np.sqrt(rank)
    y = events.ratings.astype(np.float64)
    n_obs = len(events)
    for epoch in range(epochs):
        order = rng.permutation(n_obs)
        for start in range(0, n_obs, batch_size):
            idx = order[start:start + batch_size]
            u, i = events.users[idx], events.items[idx]
            pred = mu + bu[u] + bi[i] + np.einsum("ij,ij->i", P[u], Q[i])
            err = pred - y[idx]
            if not np.isfinite(err).all():
                raise TrainingError(f"rating completion diverged at epoch {epoch}")
            step = learning_rate
            gP = err[:, None] * Q[i] + l2 * P[u]
            gQ = err[:, None] * P[u] + l2 * Q[i]
            np.add.at(bu, u, -step * (err + l2 * bu[u]))
            np.add.at(bi, i, -step * (err + l2 * bi[i]))
            np.add.at(P, u, -step * gP)
            np.add.at(Q, i, -step * gQ)
    completed = mu + bu[:, None] + bi[None, :] + P @ Q.T
    resid = completed[events.users, events.items] - y
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    logger.info("rating completion: rank=%d epochs=%d observed RMSE=%.4f",
                rank, epochs, rmse)
    return completed


def observed_rmse(completed, events: EventTable) -> float:
    resid = completed[events.users, events.items] - events.ratings
    return float(np.sqrt(np.mean(resid ** 2)))


def match_marginals(pred, dist):
    """Remap real scores onto 1..5 so the level counts hit the marginal.

    All entries are sorted ascending (ties broken by row-major cell index);
    the bottom dist[0] fraction becomes 1, the next dist[1] becomes 2, and
    so on, with boundaries floor(|D| * cumsum(dist)).
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.size != 5 or (dist < 0).any():
        raise ConfigError("marginal must be five nonnegative fractions")
    if abs(dist.sum() - 1.0) > 1e-9:
        raise ConfigError(f"marginal sums to {dist.sum()!r}, expected 1")
    pred = np.asarray(pred, dtype=np.float64)
    flat = pred.ravel()
    order = np.argsort(flat, kind="stable")
    cuts = np.floor(flat.size * np.cumsum(dist) + 1e-9).astype(np.int64)
    cuts[-1] = flat.size
    out = np.empty(flat.size, dtype=np.int64)
    start = 0
    for level, stop in enumerate(cuts, start=1):
        out[order[start:stop]] = level
        start = stop
    return out.reshape(pred.shape)


def ratings_to_ctr(ratings, p=1.0, alpha=0.5):
    """Click probability p * alpha^min(4, 6 - rating), elementwise."""
    ratings = np.asarray(ratings)
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"p must be in (0,1], got {p}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0,1), got {alpha}")
    if ratings.size and (ratings.min() < 1 or ratings.max() > 5):
        raise ConfigError("ratings must lie in 1..5")
    return p * alpha ** np.minimum(4, 6 - ratings)


def ratings_to_cvr(ratings):
    """Table lookup 1..5 -> {0.1, 0.3, 0.5, 0.7, 0.9}."""
    ratings = np.asarray(ratings)
    if ratings.size and (ratings.min() < 1 or ratings.max() > 5):
        raise ConfigError("ratings must lie in 1..5")
    return CVR_LEVELS[ratings - 1]


@dataclass
class GroundTruth:
    """Fully observed semi-synthetic truth over the user x item grid."""

    ratings: np.ndarray   # int in 1..5
    true_ctr: np.ndarray
    true_cvr: np.ndarray
    ctr_scale: float = 1.0
    alpha: float = 0.5
    marginal: tuple = RATING_MARGINAL_DEFAULT

    @property
    def shape(self):
        return self.ratings.shape

    def validate(self):
        if not (self.true_ctr > 0).all() or not (self.true_ctr <= 1).all():
            raise GenerationError("true CTR must lie in (0,1]")
        if not np.isin(np.round(self.true_cvr, 12), CVR_LEVELS).all():
            raise GenerationError("true CVR outside the five levels")
        return self


def ground_truth_from_scores(scores, marginal=RATING_MARGINAL_DEFAULT,
                             ctr_scale=1.0, alpha=0.5) -> GroundTruth:
    """Marginal-match real scores, then derive CTR and CVR matrices."""
    ratings = match_marginals(scores, marginal)
    return GroundTruth(ratings, ratings_to_ctr(ratings, ctr_scale, alpha),
                       ratings_to_cvr(ratings), ctr_scale, alpha,
                       tuple(marginal)).validate()


def build_ground_truth(events: EventTable, marginal=RATING_MARGINAL_DEFAULT,
                       ctr_scale=1.0, alpha=0.5,
                       mf: MFCompletionConfig | None = None) -> GroundTruth:
    """Full pipeline: MF completion of the events, then marginal matching."""
    mf = mf or MFCompletionConfig()
    completed = complete_ratings(events, rank=mf.rank, epochs=mf.epochs,
                                 seed=mf.seed, learning_rate=mf.learning_rate,
                                 l2=mf.l2, batch_size=mf.batch_size)
    return ground_truth_from_scores(completed, marginal, ctr_scale, alpha)


@dataclass
class SampledWorld:
    """One Bernoulli realization of clicks and (fully observed) conversions."""

    clicks: np.ndarray      # uint8
    conversions: np.ndarray  # uint8
    seed: int


def sample_world(gt: GroundTruth, seed: int) -> SampledWorld:
    """Independent per-cell Bernoulli draws keyed by (seed, stream, cell).

    Uses the counter-based Philox generator with one stream for clicks and
    one for conversions, so a given (ground truth, seed) pair reproduces
    bitwise-identical matrices regardless of platform.
    """
    gen_o = np.random.Generator(np.random.Philox(key=np.uint64(seed) << np.uint64(1)))
    gen_r = np.random.Generator(np.random.Philox(key=(np.uint64(seed) << np.uint64(1))
                                                 + np.uint64(1)))
    clicks = (gen_o.random(gt.shape) < gt.true_ctr).astype(np.uint8)
    conversions = (gen_r.random(gt.shape) < gt.true_cvr).astype(np.uint8)
    return SampledWorld(clicks, conversions, seed)


@dataclass
class PredictedMatrixKind:
    tag: str
    seed: int = 0

    def __post_init__(self):
        if self.tag not in PREDICTED_KINDS:
            raise ConfigError(f"unknown predicted-matrix kind {self.tag!r}")


def make_predicted_matrix(kind: PredictedMatrixKind, gt: GroundTruth):
    """Build one of the five adversarial predicted-CVR matrices.

    ONE/THREE/FIVE copy the true CVR then flip |{cells at 0.9}| seeded-
    uniformly chosen cells from the source level (0.1/0.3/0.5) up to 0.9.
    SKEW draws per cell from N(true, (1-true)/2) clipped to [0.1, 0.9].
    CRS maps true <= 0.7 to 0.1 and the rest to 0.5.
    """
    cvr = gt.true_cvr
    if kind.tag == "SKEW":
        rng = np.random.default_rng(kind.seed)
        draw = rng.normal(cvr, (1.0 - cvr) / 2.0)
        return np.clip(draw, 0.1, 0.9)
    if kind.tag == "CRS":
        return np.where(cvr <= 0.7, 0.1, 0.5)
    source = _FLIP_SOURCE[kind.tag]
    flat = cvr.ravel().copy()
    n_flips = int(np.count_nonzero(flat == 0.9))
    candidates = np.flatnonzero(flat == source)
    if n_flips == 0:
        return flat.reshape(cvr.shape)
    if candidates.size < n_flips:
        raise GenerationError(
            f"{kind.tag}: {candidates.size} cells at {source} cannot cover "
            f"{n_flips} flips")
    rng = np.random.default_rng(kind.seed)
    pick = rng.choice(candidates.size, size=n_flips, replace=False)
    flat[candidates[pick]] = 0.9
    return flat.reshape(cvr.shape)


def noisy_inverse_propensity(gt: GroundTruth, world: SampledWorld, beta=0.5):
    """Harmonic noise mix: 1/p-hat = (1-beta)/p + beta/p_e.

    p_e is the realized click rate of the world; the result stays in (0,1]
    whenever p and p_e do.
    """
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0,1], got {beta}")
    p_e = float(world.clicks.mean())
    if p_e <= 0.0:
        raise GenerationError("degenerate world: no clicks at all")
    return 1.0 / ((1.0 - beta) / gt.true_ctr + beta / p_e)


def pseudo_conversion_rate(kind, conversions, p_hat,
                           mrdr_symmetric_denominator=False) -> float:
    """Global pseudo conversion rate q per the printed benchmark recipes.

    kind "eib-dr": q = sum(r / p-hat) / sum(1 / p-hat).
    kind "mrdr":   numerator weights (1 - p-hat) / p-hat^2; the denominator
    is sum(1 / p-hat) as printed, or the matching weight sum when
    ``mrdr_symmetric_denominator`` is set (the printed asymmetric form can
    exceed 1 on skewed worlds).
    """
    r = np.asarray(conversions, dtype=np.float64)
    ph = np.asarray(p_hat, dtype=np.float64)
    if kind == "eib-dr":
        num = np.sum(r / ph)
        den = np.sum(1.0 / ph)
    elif kind == "mrdr":
        w = (1.0 - ph) / ph ** 2
        num = np.sum(r * w)
        den = np.sum(w) if mrdr_symmetric_denominator else np.sum(1.0 / ph)
    else:
        raise ConfigError(f"unknown heuristic kind {kind!r}")
    if den <= 0:
        raise GenerationError("zero denominator in pseudo conversion rate")
    return float(num / den)


def heuristic_imputed_errors(kind, world: SampledWorld, p_hat, r_hat,
                             mrdr_symmetric_denominator=False):
    """Imputed errors CE(q, r-hat) with the global pseudo rate q."""
    q = pseudo_conversion_rate(kind, world.conversions, p_hat,
                               mrdr_symmetric_denominator)
    return cross_entropy(q, np.asarray(r_hat, dtype=np.float64))


def anchored_imputed_errors(gt: GroundTruth, r_hat, anchor_weight):
    """Imputed errors with controlled accuracy for the benchmark.

    The pseudo label mixes the ground-truth conversion rate (weight
    1 - anchor_weight) with the predicted value itself (weight
    anchor_weight): 0 is a perfect oracle, 1 is self-consistent and carries
    no information.  Only meaningful on synthetic worlds where the truth
    exists; the weight is logged in every report.
    """
    if not 0.0 <= anchor_weight <= 1.0:
        raise ConfigError(f"anchor weight must be in [0,1], got {anchor_weight}")
    r_hat = np.asarray(r_hat, dtype=np.float64)
    label = (1.0 - anchor_weight) * gt.true_cvr + anchor_weight * r_hat
    return cross_entropy(label, r_hat)


def synthesize_events(num_users, num_items, num_events, marginal,
                      seed=0) -> EventTable:
    """Random explicit-rating table: distinct uniform pairs, iid ratings.

    Stands in for a real ratings file at matching scale when none is
    available; the benchmark's statistics depend on the rating marginal
    only, which is imposed downstream by match_marginals anyway.
    """
    universe = num_users * num_items
    if num_events > universe:
        raise ConfigError("more events than cells")
    rng = np.random.default_rng(seed)
    cells = rng.choice(universe, size=num_events, replace=False)
    cells.sort()
    ratings = rng.choice(np.arange(1, 6), size=num_events, p=np.asarray(marginal))
    return EventTable(cells // num_items, cells % num_items,
                      ratings.astype(np.int64), num_users, num_items).validate()


@dataclass
class BenchmarkConfig:
    """Estimator-comparison settings (the published-table analog)."""

    n_worlds: int = 20
    world_seed: int = 2024
    kind_seed: int = 77
    beta: float = 0.5
    anchor_weight_dr: float = ANCHOR_WEIGHT_DR
    anchor_weight_mrdr: float = ANCHOR_WEIGHT_MRDR
    naive_normalizer: str = "clicked"
    eib_normalizer: str = "universe"
    ips_normalizer: str = "universe"
    propensity_floor: float = 1e-4
    kinds: tuple = PREDICTED_KINDS

    def describe(self):
        return {
            "n_worlds": self.n_worlds, "world_seed": self.world_seed,
            "kind_seed": self.kind_seed, "beta": self.beta,
            "anchor_weight_dr": self.anchor_weight_dr,
            "anchor_weight_mrdr": self.anchor_weight_mrdr,
            "naive_normalizer": self.naive_normalizer,
            "eib_normalizer": self.eib_normalizer,
            "ips_normalizer": self.ips_normalizer,
            "propensity_floor": self.propensity_floor,
        }


def run_estimator_benchmark(gt: GroundTruth, config: BenchmarkConfig | None = None):
    """Evaluate the five estimators under the five predicted matrices.

    Returns (reports, re_table) where ``reports`` is a list of
    EstimateReport (one per setting x estimator) and ``re_table`` maps
    setting -> estimator -> array of per-world relative errors.
    """
    config = config or BenchmarkConfig()
    kinds = [PredictedMatrixKind(tag, config.kind_seed + j)
             for j, tag in enumerate(config.kinds)]
    r_hats = {k.tag: make_predicted_matrix(k, gt) for k in kinds}
    re_table = {k.tag: {name: [] for name in ESTIMATOR_NAMES} for k in kinds}
    sums = {k.tag: {name: [] for name in ("loss", "ideal", "bias", "var")}
            for k in kinds}
    for w in range(config.n_worlds):
        world = sample_world(gt, config.world_seed + w)
        p_hat = noisy_inverse_propensity(gt, world, config.beta)
        for tag, r_hat in r_hats.items():
            errors = cross_entropy(world.conversions, r_hat)
            ideal = ideal_loss(world.conversions, r_hat)
            eh_eib = heuristic_imputed_errors("eib-dr", world, p_hat, r_hat)
            eh_dr = anchored_imputed_errors(gt, r_hat, config.anchor_weight_dr)
            eh_mrdr = anchored_imputed_errors(gt, r_hat, config.anchor_weight_mrdr)
            base = dict(clicks=world.clicks, conversions=world.conversions,
                        predicted_cvr=r_hat, propensities=p_hat)
            values = {
                "naive": naive_loss(LossInputs(**base),
                                    normalizer=config.naive_normalizer),
                "eib": eib_loss(LossInputs(**base, imputed_errors=eh_eib),
                                normalizer=config.eib_normalizer),
                "ips": ips_loss(LossInputs(**base),
                                normalizer=config.ips_normalizer,
                                floor=config.propensity_floor),
                "dr": dr_loss(LossInputs(**base, imputed_errors=eh_dr),
                              floor=config.propensity_floor),
                "mrdr": dr_loss(LossInputs(**base, imputed_errors=eh_mrdr),
                                floor=config.propensity_floor),
            }
            for name, value in values.items():
                re_table[tag][name].append(relative_error(ideal, value))
            sums[tag]["ideal"].append(ideal)
            sums[tag]["loss"].append(values)
            sums[tag]["bias"].append({
                "dr": dr_bias(gt.true_ctr, p_hat, errors, eh_dr),
                "mrdr": dr_bias(gt.true_ctr, p_hat, errors, eh_mrdr),
            })
            sums[tag]["var"].append({
                "ips": ips_variance(gt.true_ctr, p_hat, errors),
                "dr": dr_variance(gt.true_ctr, p_hat, errors, eh_dr),
                "mrdr": dr_variance(gt.true_ctr, p_hat, errors, eh_mrdr),
            })
    reports = []
    for tag in re_table:
        ideal_mean = float(np.mean(sums[tag]["ideal"]))
        for name in ESTIMATOR_NAMES:
            res = np.array(re_table[tag][name])
            re_table[tag][name] = res
            losses = [v[name] for v in sums[tag]["loss"]]
            biases = [b.get(name, float("nan")) for b in sums[tag]["bias"]]
            variances = [v.get(name, float("nan")) for v in sums[tag]["var"]]
            reports.append(EstimateReport(
                setting=tag, estimator=name, loss=float(np.mean(losses)),
                ideal=ideal_mean, re_mean=float(res.mean()),
                re_std=float(res.std(ddof=0)),
                analytic_bias=float(np.mean(biases)),
                analytic_variance=float(np.mean(variances)),
                n_seeds=config.n_worlds))
    return reports, re_table


_GT_FILES = {"ratings": np.int64, "true_ctr": np.float64, "true_cvr": np.float64}


def save_ground_truth(out_dir, gt: GroundTruth):
    """Persist as flat binary matrices plus a key=value manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, dtype in _GT_FILES.items():
        np.ascontiguousarray(getattr(gt, name), dtype=dtype).tofile(out_dir / f"{name}.bin")
    write_manifest(out_dir / "manifest.txt", {
        "kind": "ground_truth",
        "num_users": gt.shape[0], "num_items": gt.shape[1],
        "ctr_scale": gt.ctr_scale, "alpha": gt.alpha,
        "marginal": ",".join(repr(x) for x in gt.marginal),
    })


def load_ground_truth(in_dir) -> GroundTruth:
    in_dir = Path(in_dir)
    mf = load_manifest(in_dir / "manifest.txt")
    if mf.get("kind") != "ground_truth":
        raise ConfigError(f"{in_dir} does not hold a ground-truth manifest")
    shape = (int(mf["num_users"]), int(mf["num_items"]))
    arrays = {}
    for name, dtype in _GT_FILES.items():
        arrays[name] = np.fromfile(in_dir / f"{name}.bin", dtype=dtype).reshape(shape)
    return GroundTruth(arrays["ratings"], arrays["true_ctr"], arrays["true_cvr"],
                       float(mf["ctr_scale"]), float(mf["alpha"]),
                       tuple(float(x) for x in mf["marginal"].split(","))).validate()


def latent_scores(num_users, num_items, rank=8, item_spread=1.0,
                  noise=1.0, seed=0):
    """Low-rank real scores with item-popularity spread, for simulated data."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, size=(num_users, rank))
    b = rng.normal(0.0, 1.0, size=(num_items, rank))
    s = a @ b.T / np.sqrt(rank)
    s += item_spread * rng.normal(0.0, 1.0, size=(1, num_items))
    s += noise * rng.normal(0.0, 1.0, size=(num_users, num_items))
    return s


@dataclass
class SimulationSpec:
    """Shape of a simulated MNAR/MAR dataset pair.

    Stands in for the real MNAR-logging datasets when those files are not
    available: one sampled world provides the MNAR panel (clicked cells
    with conversion labels), and an independent per-user random item panel
    with fresh Bernoulli conversions provides the MAR test set.
    """

    num_users: int = 290
    num_items: int = 300
    ctr_scale: float = 0.84          # ~8% click rate under the default marginal
    alpha: float = 0.5
    marginal: tuple = RATING_MARGINAL_DEFAULT
    latent_rank: int = 8
    item_spread: float = 1.0
    noise: float = 1.0
    mar_items_per_user: int = 16
    mar_user_fraction: float = 1.0
    seed: int = 0


def simulate_mnar_mar_tables(spec: SimulationSpec):
    """Build (mnar EventTable, mar EventTable, GroundTruth) per the spec.

    Conversion labels are encoded as ratings (5 = converted, 1 = not), so
    the standard rating >= 4 binarization recovers them exactly.
    """
    seq = np.random.SeedSequence(spec.seed)
    s_scores, s_world, s_mar_cells, s_mar_labels = (
        int(s.generate_state(1)[0]) for s in seq.spawn(4))
    scores = latent_scores(spec.num_users, spec.num_items, spec.latent_rank,
                           spec.item_spread, spec.noise, s_scores)
    gt = ground_truth_from_scores(scores, spec.marginal, spec.ctr_scale,
                                  spec.alpha)
    world = sample_world(gt, s_world)
    mu, mi = np.nonzero(world.clicks)
    mnar_ratings = np.where(world.conversions[mu, mi] > 0, 5, 1).astype(np.int64)
    mnar = EventTable(mu.astype(np.int64), mi.astype(np.int64), mnar_ratings,
                      spec.num_users, spec.num_items)

    rng_cells = np.random.default_rng(s_mar_cells)
    rng_labels = np.random.default_rng(s_mar_labels)
    n_mar_users = int(round(spec.mar_user_fraction * spec.num_users))
    mar_users = rng_cells.choice(spec.num_users, size=n_mar_users, replace=False)
    mar_users.sort()
    users, items = [], []
    for u in mar_users:
        picks = rng_cells.choice(spec.num_items, size=spec.mar_items_per_user,
                                 replace=False)
        users.append(np.full(picks.size, u, dtype=np.int64))
        items.append(np.sort(picks).astype(np.int64))
    users = np.concatenate(users)
    items = np.concatenate(items)
    converted = rng_labels.random(users.size) < gt.true_cvr[users, items]
    mar = EventTable(users, items, np.where(converted, 5, 1).astype(np.int64),
                     spec.num_users, spec.num_items)
    return mnar.validate(), mar.validate(), gt


def write_simulated_dataset(out_dir, spec: SimulationSpec, name="simulated"):
    """Write a simulated MNAR/MAR pair as triple-text files plus a manifest.

    Returns the manifest path; consumable by the train/eval/sweep/ablate
    commands exactly like a real dataset.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mnar, mar, _ = simulate_mnar_mar_tables(spec)
    for fname, table in (("mnar.txt", mnar), ("mar.txt", mar)):
        with open(out_dir / fname, "w") as fh:
            for u, i, r in zip(table.users, table.items, table.ratings):
                fh.write(f"{u} {i} {r}\n")
    manifest_path = out_dir / "manifest.txt"
    write_manifest(manifest_path, {
        "name": name, "format": "triple-text",
        "mnar_path": "mnar.txt", "mar_path": "mar.txt",
        "num_users": spec.num_users, "num_items": spec.num_items,
        "split_seed": spec.seed, "train_fraction": 0.9,
        "simulated": 1, "sim_seed": spec.seed,
        "sim_ctr_scale": spec.ctr_scale,
        "sim_marginal": ",".join(repr(x) for x in spec.marginal),
    })
    return manifest_path
