"""Dataset ingestion: explicit ratings -> post-click conversion setting.

Supported file formats:
  * ``triple-text``: whitespace-separated ``user item rating`` lines,
    0-based indices (override with ``index_base``).
  * ``movielens-100k``: tab-separated ``user\\titem\\trating\\ttimestamp``,
    1-based indices.
  * ``coat-dense``: dense space-separated rating matrix, one row per user;
    zeros mean unclicked, nonzeros are ratings.

A dataset manifest is a key=value text file naming the format, the MNAR and
MAR file paths, and the split seed (see :func:`load_dataset_from_manifest`).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EvaluationError, ParseError, ValidationError

logger = logging.getLogger(__name__)

_FORMAT_BASES = {"triple-text": 0, "movielens-100k": 1}


@dataclass
class EventTable:
    """Sparse explicit-rating records with contiguous 0-based indices."""

    users: np.ndarray   # int64
    items: np.ndarray   # int64
    ratings: np.ndarray  # int64 in 1..5
    num_users: int
    num_items: int

    def __len__(self):
        return self.users.size

    def validate(self):
        if self.users.size != self.items.size or self.users.size != self.ratings.size:
            raise ValidationError("ragged event table")
        if self.users.size:
            if self.users.min() < 0 or self.users.max() >= self.num_users:
                raise ValidationError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= self.num_items:
                raise ValidationError("item index out of range")
            if self.ratings.min() < 1 or self.ratings.max() > 5:
                raise ValidationError("ratings must lie in 1..5")
            pairs = self.users * self.num_items + self.items
            if np.unique(pairs).size != pairs.size:
                raise ValidationError("duplicate (user, item) pair")
        return self


def _dedup_last(users, items, ratings, strict):
    """Keep the last occurrence of each (user, item) pair."""
    if users.size == 0:
        return users, items, ratings
    key = users.astype(np.int64) * (items.max() + 1 if items.size else 1) + items
    _, last_idx = np.unique(key[::-1], return_index=True)
    keep = users.size - 1 - last_idx
    if keep.size != users.size:
        if strict:
            raise ValidationError(
                f"{users.size - keep.size} duplicate (user, item) pairs")
        logger.warning("dropping %d duplicate pairs (keeping last occurrence)",
                       users.size - keep.size)
    keep.sort()
    return users[keep], items[keep], ratings[keep]


def load_ratings(path, fmt, index_base=None, num_users=None, num_items=None,
                 strict=False) -> EventTable:
    """Parse a ratings file into an EventTable.

    Duplicate pairs keep the last occurrence with a warning (``strict=True``
    raises instead).  Malformed lines and out-of-range ratings raise
    :class:`ParseError` carrying the line number.
    """
    path = Path(path)
    if fmt == "coat-dense":
        return _load_dense(path, num_users, num_items, strict)
    if fmt not in _FORMAT_BASES:
        raise ConfigError(f"unknown dataset format {fmt!r}")
    base = _FORMAT_BASES[fmt] if index_base is None else int(index_base)
    users, items, ratings = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ParseError(f"{path}:{lineno}: expected 'user item rating'")
            try:
                u, i, r = int(parts[0]), int(parts[1]), int(float(parts[2]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not 1 <= r <= 5:
                raise ParseError(f"{path}:{lineno}: rating {r} outside 1..5")
            if u - base < 0 or i - base < 0:
                raise ParseError(f"{path}:{lineno}: index below base {base}")
            users.append(u - base)
            items.append(i - base)
            ratings.append(r)
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    ratings = np.asarray(ratings, dtype=np.int64)
    users, items, ratings = _dedup_last(users, items, ratings, strict)
    m = int(users.max()) + 1 if users.size else 0
    n = int(items.max()) + 1 if items.size else 0
    table = EventTable(users, items, ratings,
                       num_users if num_users is not None else m,
                       num_items if num_items is not None else n)
    return table.validate()


def _load_dense(path, num_users, num_items, strict):
    matrix = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if matrix.size == 0:
        return EventTable(np.empty(0, np.int64), np.empty(0, np.int64),
                          np.empty(0, np.int64), 0, 0)
    bad = (matrix < 0) | (matrix > 5)
    if bad.any():
        u, i = np.argwhere(bad)[0]
        raise ParseError(f"{path}: value {matrix[u, i]} at row {u} col {i} "
                         "outside 0..5")
    users, items = np.nonzero(matrix)
    table = EventTable(users.astype(np.int64), items.astype(np.int64),
                       matrix[users, items],
                       num_users if num_users is not None else matrix.shape[0],
                       num_items if num_items is not None else matrix.shape[1])
    return table.validate()


@dataclass
class ConversionDataset:
    """Clicked (user, item) cells with binary conversion labels.

    The click support is the set of stored pairs; conversions are defined
    only on that support.  ``num_users``/``num_items`` describe the full
    grid, so the universe size is their product.
    """

    users: np.ndarray
    items: np.ndarray
    labels: np.ndarray  # uint8 in {0, 1}
    num_users: int
    num_items: int

    def __len__(self):
        return self.users.size

    @property
    def universe_size(self):
        return self.num_users * self.num_items

    @property
    def num_clicked(self):
        return self.users.size

    def validate(self):
        if self.users.size:
            if self.users.min() < 0 or self.users.max() >= self.num_users:
                raise ValidationError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= self.num_items:
                raise ValidationError("item index out of range")
            if not np.isin(self.labels, (0, 1)).all():
                raise ValidationError("labels must be binary")
            if np.unique(self.pair_keys()).size != self.users.size:
                raise ValidationError("duplicate pair in conversion dataset")
        return self

    def pair_keys(self):
        return self.users.astype(np.int64) * self.num_items + self.items

    def dense_clicks(self):
        O = np.zeros((self.num_users, self.num_items), dtype=np.uint8)
        O[self.users, self.items] = 1
        return O

    def dense_labels(self):
        """Labels on the click support, zero elsewhere (support from clicks)."""
        R = np.zeros((self.num_users, self.num_items), dtype=np.uint8)
        R[self.users, self.items] = self.labels
        return R


def to_conversion_setting(events: EventTable) -> ConversionDataset:
    """Clicked iff rated; converted iff rating >= 4."""
    if len(events) == 0:
        raise ValidationError("empty event table")
    labels = (events.ratings >= 4).astype(np.uint8)
    return ConversionDataset(events.users.copy(), events.items.copy(), labels,
                             events.num_users, events.num_items).validate()


@dataclass
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0


def split_mnar(ds: ConversionDataset, spec: SplitSpec):
    """Partition clicked events into train/validation by a seeded shuffle.

    The train half gets floor(n * train_fraction) events; both halves keep
    the full grid dimensions.
    """
    if not 0.0 < spec.train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0,1), got {spec.train_fraction}")
    n = len(ds)
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    cut = int(math.floor(n * spec.train_fraction + 1e-9))
    tr, va = np.sort(order[:cut]), np.sort(order[cut:])

    def take(idx):
        return ConversionDataset(ds.users[idx], ds.items[idx], ds.labels[idx],
                                 ds.num_users, ds.num_items)

    return take(tr), take(va)


def filter_test_users(test: ConversionDataset) -> ConversionDataset:
    """Drop all events of users with zero positive conversions.

    User indexing is preserved (no reindexing) so model lookups stay valid;
    the item axis is untouched.
    """
    positives = np.zeros(test.num_users, dtype=np.int64)
    np.add.at(positives, test.users, test.labels.astype(np.int64))
    keep_users = positives > 0
    mask = keep_users[test.users]
    if not mask.any():
        raise EvaluationError("all test users filtered (no conversions)")
    kept = ConversionDataset(test.users[mask], test.items[mask],
                             test.labels[mask], test.num_users, test.num_items)
    logger.info("test-user filter kept %d of %d users (%d of %d events)",
                int(np.count_nonzero(keep_users[np.unique(test.users)])),
                np.unique(test.users).size, len(kept), len(test))
    return kept


def save_conversions(path, ds: ConversionDataset):
    """Text serialization: a header line then one ``user item label`` row
    per clicked event."""
    with open(path, "w") as fh:
        fh.write(f"# num_users={ds.num_users} num_items={ds.num_items}\n")
        for u, i, r in zip(ds.users, ds.items, ds.labels):
            fh.write(f"{u} {i} {r}\n")


def load_conversions(path) -> ConversionDataset:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ParseError(f"{path}:1: missing header line")
        fields = dict(part.split("=") for part in header[1:].split())
        users, items, labels = [], [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'user item label'")
            users.append(int(parts[0]))
            items.append(int(parts[1]))
            labels.append(int(parts[2]))
    return ConversionDataset(np.asarray(users, np.int64), np.asarray(items, np.int64),
                             np.asarray(labels, np.uint8),
                             int(fields["num_users"]), int(fields["num_items"])).validate()


def write_manifest(path, entries: dict):
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")


def load_manifest(path) -> dict:
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def load_dataset_from_manifest(manifest_path):
    """Load the MNAR/MAR pair named by a manifest.

    Required keys: ``format``, ``mnar_path``, ``mar_path``.  Optional:
    ``index_base``, ``train_fraction`` (default 0.9), ``split_seed``
    (default 0).  Relative paths resolve against the manifest location.
    Both files share grid dimensions (the elementwise max of each file's).

    Returns (mnar ConversionDataset, mar ConversionDataset, manifest dict).
    """
    manifest_path = Path(manifest_path)
    mf = load_manifest(manifest_path)
    for key in ("format", "mnar_path", "mar_path"):
        if key not in mf:
            raise ConfigError(f"manifest missing required key {key!r}")
    base = manifest_path.parent
    index_base = int(mf["index_base"]) if "index_base" in mf else None
    fmt = mf["format"]
    mnar_events = load_ratings(base / mf["mnar_path"], fmt, index_base=index_base)
    mar_events = load_ratings(base / mf["mar_path"], fmt, index_base=index_base)
    num_users = max(mnar_events.num_users, mar_events.num_users)
    num_items = max(mnar_events.num_items, mar_events.num_items)
    for ev in (mnar_events, mar_events):
        ev.num_users, ev.num_items = num_users, num_items
    return to_conversion_setting(mnar_events), to_conversion_setting(mar_events), mf
