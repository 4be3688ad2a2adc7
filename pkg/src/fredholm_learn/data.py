"""Dataset loading, label binarisation, z-scoring and stratified splits."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "Dataset",
    "DataSplit",
    "Normalizer",
    "DatasetEntry",
    "load_csv",
    "load_manifest",
    "fit_normalizer",
    "apply_normalizer",
    "split",
    "stratified_folds",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None
    column_names: list[str]
    name: str = "dataset"
    n_dropped: int = 0
    raw_columns: int | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        object.__setattr__(self, "features", X)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise ValueError("labels must have one entry per row")
            if not np.all((y == 0) | (y == 1)):
                raise ValueError("labels must be 0/1")
            object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.features.tobytes())
        if self.labels is not None:
            h.update(self.labels.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class DataSplit:
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    proportions: tuple[float, float, float]


@dataclass(frozen=True)
class Normalizer:
    means: np.ndarray
    stds: np.ndarray


@dataclass(frozen=True)
class DatasetEntry:
    """One dataset of a manifest: where it lives and how to label it."""

    name: str
    path: str
    label_column: str | int
    positive: str | float
    rule: str = "value"
    drop_columns: list = field(default_factory=list)

    def load(self, base: Path | None = None) -> Dataset:
        p = Path(self.path)
        if base is not None and not p.is_absolute():
            p = base / p
        return load_csv(p, self.label_column, self.positive, rule=self.rule,
                        name=self.name, drop_columns=self.drop_columns)


def _is_missing(cell: str) -> bool:
    return cell.strip() in ("", "?", "NA", "NaN", "nan", "null")


def load_csv(path, label_column, positive_rule, *, rule: str = "value", name: str | None = None,
             drop_columns=()) -> Dataset:
    """Read a comma-separated file with a header row.

    Parameters
    ----------
    label_column : str or int
        Header name or zero-based column index of the label.
    positive_rule : str or float
        With ``rule="value"`` rows whose label equals this value (compared
        as text, and numerically when both parse) become 1.  With
        ``rule="threshold"`` labels ``>= positive_rule`` become 1.

    Rows with a missing or non-numeric feature cell, or a missing label, are
    dropped; the count is kept in ``Dataset.n_dropped``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.isdigit()
                                         and label_column not in header):
        li = int(label_column)
        if not 0 <= li < len(header):
            raise ValueError(f"{path}: label column index {li} out of range")
    else:
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not found in header")
        li = header.index(label_column)
    drop = {header.index(c) if isinstance(c, str) else int(c) for c in drop_columns}
    feat_idx = [i for i in range(len(header)) if i != li and i not in drop]

    if rule not in ("value", "threshold"):
        raise ValueError(f"unknown positive rule {rule!r}")

    feats, labels, dropped = [], [], 0
    for r in rows:
        if len(r) != len(header) or _is_missing(r[li]):
            dropped += 1
            continue
        try:
            x = [float(r[i]) for i in feat_idx]
        except ValueError:
            dropped += 1
            continue
        if not all(math.isfinite(v) for v in x):
            dropped += 1
            continue
        lab = r[li].strip()
        if rule == "threshold":
            try:
                y = int(float(lab) >= float(positive_rule))
            except ValueError:
                dropped += 1
                continue
        else:
            y = int(lab == str(positive_rule).strip())
            if not y:
                try:
                    y = int(float(lab) == float(positive_rule))
                except ValueError:
                    pass
        feats.append(x)
        labels.append(y)
    if dropped:
        logger.warning("%s: dropped %d row(s) with missing or unparseable cells", path.name, dropped)
    if not feats:
        raise ValueError(f"{path}: no usable rows")
    y = np.asarray(labels, dtype=np.int64)
    if y.min() == y.max():
        raise ValueError(f"{path}: labels are single-class after applying the positive rule")
    return Dataset(
        np.asarray(feats, dtype=float),
        y,
        [header[i] for i in feat_idx],
        name or path.stem,
        n_dropped=dropped,
        raw_columns=len(header),
    )


def load_manifest(path) -> list[DatasetEntry]:
    """Dataset manifest: ``{"datasets": [{name, path, label_column, positive, rule}]}``.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    out = []
    for e in doc["datasets"]:
        p = Path(e["path"])
        if not p.is_absolute():
            p = path.parent / p
        out.append(DatasetEntry(e["name"], str(p), e["label_column"], e["positive"],
                                e.get("rule", "value"), e.get("drop_columns", [])))
    return out


def fit_normalizer(X_train) -> Normalizer:
    """Column means and sample (ddof=1) standard deviations.

    Constant columns, and the single-row case, get a std of 1.
    """
    X = np.asarray(X_train, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("cannot fit a normalizer on zero rows")
    means = X.mean(axis=0)
    if X.shape[0] > 1:
        stds = X.std(axis=0, ddof=1)
    else:
        stds = np.zeros(X.shape[1])
    stds = np.where(stds > 1e-12 * np.maximum(1.0, np.abs(means)), stds, 1.0)
    return Normalizer(means, stds)


def apply_normalizer(norm: Normalizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    out = (X - norm.means) / norm.stds
    return out[:, 0] if squeeze else out


def _floor(p: float, n: int) -> int:
    return int(math.floor(p * n + 1e-9))


def split(dataset: Dataset | np.ndarray, proportions, seed: int) -> DataSplit:
    """Stratified labeled sample, then an unlabeled pool and a test set.

    ``proportions = (labeled, unlabeled, test)``.  The labeled sample has
    ``floor(labeled * n)`` points (at least one per class), allocated to the
    classes by largest remainder.  The unlabeled fraction may be 0.
    """
    y = dataset.labels if isinstance(dataset, Dataset) else np.asarray(dataset)
    if y is None:
        raise ValueError("split needs labels for stratification")
    p_l, p_u, p_t = (float(p) for p in proportions)
    if not (0 < p_l <= 1 and 0 <= p_u <= 1 and 0 <= p_t <= 1):
        raise ValueError(f"proportions must lie in [0, 1] with labeled > 0, got {proportions}")
    if p_l + p_u + p_t > 1 + 1e-9:
        raise ValueError(f"proportions sum to more than 1: {proportions}")
    n = y.size
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("dataset is single-class; cannot stratify")
    n_l = _floor(p_l, n)
    if n_l < classes.size:
        if n >= classes.size and p_l * n >= 1:
            n_l = classes.size
        else:
            raise ValueError(f"labeled fraction {p_l} of n={n} is too small for both classes")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5B11]))
    members = {c: rng.permutation(np.flatnonzero(y == c)) for c in classes}
    counts = np.array([members[c].size for c in classes])
    quota = n_l * counts / n
    take = np.maximum(np.floor(quota).astype(int), 1)
    while take.sum() > n_l:
        i = int(np.argmax(np.where(take > 1, take - quota, -np.inf)))
        take[i] -= 1
    order = np.argsort(-(quota - np.floor(quota)), kind="stable")
    j = 0
    while take.sum() < n_l:
        i = order[j % order.size]
        if take[i] < counts[i]:
            take[i] += 1
        j += 1
    labeled = np.concatenate([members[c][:t] for c, t in zip(classes, take)])
    rest = np.concatenate([members[c][t:] for c, t in zip(classes, take)])
    labeled = np.sort(labeled)
    rest = rng.permutation(np.sort(rest))
    n_u = _floor(p_u, n)
    n_t = _floor(p_t, n)
    if n_u + n_t > rest.size:
        # rounding leftovers: shrink the pool first, never the labeled sample
        overflow = n_u + n_t - rest.size
        cut = min(overflow, n_u)
        n_u -= cut
        n_t -= overflow - cut
    unlabeled = np.sort(rest[:n_u])
    test = np.sort(rest[n_u:n_u + n_t])
    return DataSplit(labeled, unlabeled, test, int(seed), (p_l, p_u, p_t))


def stratified_folds(y, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per sample; each class is dealt round-robin after a shuffle."""
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > y.size:
        raise ValueError(f"{folds} folds requested for {y.size} samples")
    fold_of = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return fold_of
