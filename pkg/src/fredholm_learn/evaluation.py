"""
Metrics, repeated stratified k-fold cross-validation and grid search.

Selection maximises mean AUC.  Ties go to the larger regularisation weight
and then to the lexicographically smaller (operator, data, kernel) label, so
the selected cell is a deterministic function of the scores.

Randomness: the fold partition of repeat ``r`` is drawn from
``SeedSequence([seed, r])`` (``[seed, r, 1]`` after a reseed) and the
holdout split of repeat ``r`` from ``split(..., seed=seed * 1000 + r)``.
Fitting itself is deterministic, so results do not depend on how the
(repeat, fold) tasks are scheduled over worker processes.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, DataSplit, apply_normalizer, fit_normalizer, split, stratified_folds
from .kernels import MSDF_FAMILIES, KernelSpec
from .methods import METHODS, SEMI_SUPERVISED, Cell, fold_scores
from .solvers import GraphWeights

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "CellRecord",
    "CVResult",
    "auc",
    "accuracy",
    "expand_grid",
    "kfold_cv",
    "holdout_eval",
    "grid_search",
    "select_best",
    "default_msdf_kernels",
    "heldout_auc",
]

DEFAULT_LAMBDAS = tuple(float(v) for v in np.logspace(-4, 2, 7))


def default_msdf_kernels() -> list[KernelSpec]:
    """M1..M4, each at widths 1/d, 1 and d."""
    out = []
    for fam in MSDF_FAMILIES:
        for s in ("1/d", 1.0, "d"):
            out.append(KernelSpec(fam, s))
    return out


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: share of (positive, negative) pairs ranked correctly, ties 1/2."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    if np.any(np.isnan(s)):
        return float("nan")
    ranks = rankdata(s, method="average")
    # U statistic is a half-integer, exact in double precision
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Fraction correct when ``score >= threshold`` predicts class 1."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.size == 0:
        return float("nan")
    return float(np.mean((s >= threshold).astype(int) == y))


@dataclass(frozen=True)
class ExperimentConfig:
    """Method, parameter grids and evaluation protocol.

    Kernel widths and ``sigma_v_grid`` entries may be expressions in the
    input dimension (``"d"``, ``"1/d"``).
    """

    method: str = "KRLS"
    kernel_grid: tuple = (KernelSpec("gaussian", "d"),)
    operator_kernel_grid: tuple = field(default_factory=lambda: tuple(default_msdf_kernels()))
    data_kernel_grid: tuple = field(default_factory=lambda: tuple(default_msdf_kernels()))
    lambda_grid: tuple = DEFAULT_LAMBDAS
    mr_c1_grid: tuple = (0.1, 1.0, 10.0)
    sigma_v_grid: tuple = ("d",)
    repeats: int = 10
    folds: int = 5
    seed: int = 0
    proportions: tuple = (0.25, 0.5, 0.25)
    iv_form: str = "cdf"
    mr_neighbors: int | None = 10
    mr_weight_kernel: KernelSpec = KernelSpec("gaussian", "1/d")
    pooled: bool = False
    box_constraint: bool = False

    def __post_init__(self):
        m = self.method.upper()
        if m not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "method", m)
        for name in ("kernel_grid", "operator_kernel_grid", "data_kernel_grid", "lambda_grid",
                     "mr_c1_grid", "sigma_v_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if any(not lam > 0 for lam in self.lambda_grid):
            raise ValueError("lambda grid entries must be positive")
        if self.folds < 2 or self.repeats < 1:
            raise ValueError("need folds >= 2 and repeats >= 1")

    @property
    def mr_weights(self) -> GraphWeights:
        return GraphWeights(self.mr_weight_kernel, self.mr_neighbors)

    def with_method(self, method: str) -> ExperimentConfig:
        return replace(self, method=method)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "kernel_grid": [k.to_dict() for k in self.kernel_grid],
            "operator_kernel_grid": [k.to_dict() for k in self.operator_kernel_grid],
            "data_kernel_grid": [k.to_dict() for k in self.data_kernel_grid],
            "lambda_grid": list(self.lambda_grid),
            "mr_c1_grid": list(self.mr_c1_grid),
            "sigma_v_grid": list(self.sigma_v_grid),
            "repeats": self.repeats,
            "folds": self.folds,
            "seed": self.seed,
            "proportions": list(self.proportions),
            "iv_form": self.iv_form,
            "mr_neighbors": self.mr_neighbors,
            "mr_weight_kernel": self.mr_weight_kernel.to_dict(),
            "pooled": self.pooled,
            "box_constraint": self.box_constraint,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        kw = dict(doc)
        for name in ("kernel_grid", "operator_kernel_grid", "data_kernel_grid"):
            if name in kw:
                kw[name] = tuple(KernelSpec.from_dict(k) for k in kw[name])
        if "mr_weight_kernel" in kw:
            kw["mr_weight_kernel"] = KernelSpec.from_dict(kw["mr_weight_kernel"])
        if "proportions" in kw:
            kw["proportions"] = tuple(kw["proportions"])
        known = set(cls.__dataclass_fields__)
        unknown = set(kw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw)


def expand_grid(config: ExperimentConfig) -> list[Cell]:
    """Cartesian product of the grids relevant to ``config.method``."""
    m = config.method
    lams = config.lambda_grid
    cells = []
    if m in ("KRLS", "IV", "SIV", "FRED"):
        for k, lam in itertools.product(config.kernel_grid, lams):
            cells.append(Cell(m, lam, k))
    elif m in ("GV", "SGV"):
        for k, sv, lam in itertools.product(config.kernel_grid, config.sigma_v_grid, lams):
            cells.append(Cell(m, lam, k, sigma_v=sv))
    elif m == "MR":
        for k, c1, lam in itertools.product(config.kernel_grid, config.mr_c1_grid, lams):
            cells.append(Cell(m, lam, k, c1=c1))
    elif m == "MSDF":
        for k, op, dk, lam in itertools.product(config.kernel_grid, config.operator_kernel_grid,
                                                config.data_kernel_grid, lams):
            cells.append(Cell(m, lam, k, operator=op, data=dk))
    return cells


@dataclass
class CellRecord:
    cell: Cell
    fold_auc: list
    fold_accuracy: list
    fold_penalty: list = field(default_factory=list)

    @property
    def mean_penalty(self) -> float:
        a = np.asarray(self.fold_penalty, dtype=float)
        return float(a.mean()) if a.size else float("nan")

    @property
    def mean_auc(self) -> float:
        a = np.asarray(self.fold_auc, dtype=float)
        return float(a.mean()) if a.size and not np.any(np.isnan(a)) else float("nan")

    @property
    def std_auc(self) -> float:
        a = np.asarray(self.fold_auc, dtype=float)
        return float(a.std(ddof=1)) if a.size > 1 and not np.any(np.isnan(a)) else float("nan")

    @property
    def mean_accuracy(self) -> float:
        a = np.asarray(self.fold_accuracy, dtype=float)
        return float(np.nanmean(a)) if a.size and not np.all(np.isnan(a)) else float("nan")


@dataclass
class CVResult:
    records: list
    best_cell: CellRecord | None
    mode: str = "cv"
    n_labeled: int = 0
    n_unlabeled: int = 0

    def record_for(self, cell: Cell) -> CellRecord:
        for r in self.records:
            if r.cell == cell:
                return r
        raise KeyError(cell.cell_id)


def _sort_key(rec: CellRecord):
    c = rec.cell
    mean = rec.mean_auc
    return (
        -mean if not math.isnan(mean) else math.inf,
        -c.lam,
        c.operator.label if c.operator else "",
        c.data.label if c.data else "",
        c.kernel.label,
        c.cell_id,
    )


def select_best(records) -> CellRecord | None:
    """Max mean AUC; ties to larger lambda, then lexicographic kernel labels."""
    valid = [r for r in records if not math.isnan(r.mean_auc)]
    if not valid:
        return None
    return min(valid, key=_sort_key)


def _fold_task(args):
    cells, X_tr, y_tr, X_u, X_ev, opts = args
    norm = fit_normalizer(X_tr)
    Z_tr = apply_normalizer(norm, X_tr)
    Z_u = apply_normalizer(norm, X_u) if X_u is not None and len(X_u) else None
    Z_ev = apply_normalizer(norm, X_ev)
    return fold_scores(cells, Z_tr, y_tr, Z_u, Z_ev, with_penalty=True, **opts)


def _run(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [_fold_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_fold_task, tasks))


def _opts(config: ExperimentConfig) -> dict:
    return {
        "iv_form": config.iv_form,
        "mr_weights": config.mr_weights,
        "box_constraint": config.box_constraint,
    }


def _labeled_unlabeled(dataset: Dataset, data_split: DataSplit | None):
    if dataset.labels is None:
        raise ValueError("dataset has no labels")
    if data_split is None:
        lab = np.arange(dataset.n)
        unl = np.empty(0, dtype=int)
    else:
        lab = np.asarray(data_split.labeled_idx)
        unl = np.asarray(data_split.unlabeled_idx)
    return lab, unl


def _fold_partition(y, folds, seed, repeat, pooled):
    for attempt in range(2):
        key = [seed, repeat] if attempt == 0 else [seed, repeat, 1]
        fold_of = stratified_folds(y, folds, np.random.default_rng(np.random.SeedSequence(key)))
        if pooled:
            return fold_of
        ok = all(np.unique(y[fold_of == f]).size == 2 for f in range(folds))
        if ok:
            return fold_of
        logger.info("repeat %d: a fold is single-class; reseeding", repeat)
    raise ValueError(
        f"repeat {repeat}: cannot build {folds} folds that each contain both classes "
        f"(class counts {np.bincount(y).tolist()}); use fewer folds or pooled AUC"
    )


def kfold_cv(config: ExperimentConfig, dataset: Dataset, data_split: DataSplit | None = None,
             cells=None, jobs: int = 1) -> CVResult:
    """Repeated stratified k-fold CV over the labeled set.

    Every fold refits the normaliser on its training portion.  The unlabeled
    pool of ``data_split`` is available to the semi-supervised methods in
    every fold and never scored.  With ``config.pooled`` one AUC per repeat
    is computed from the pooled held-out scores (needed for leave-one-out).
    """
    cells = expand_grid(config) if cells is None else list(cells)
    lab, unl = _labeled_unlabeled(dataset, data_split)
    X = dataset.features
    y = dataset.labels[lab]
    X_l = X[lab]
    X_u = X[unl] if (unl.size and config.method in SEMI_SUPERVISED) else None
    opts = _opts(config)

    partitions = [_fold_partition(y, config.folds, config.seed, r, config.pooled)
                  for r in range(config.repeats)]
    tasks, keys = [], []
    for r, fold_of in enumerate(partitions):
        for f in range(config.folds):
            tr, ev = fold_of != f, fold_of == f
            tasks.append((cells, X_l[tr], y[tr], X_u, X_l[ev], opts))
            keys.append((r, f))
    results = _run(tasks, jobs)

    fold_auc = [[] for _ in cells]
    fold_acc = [[] for _ in cells]
    fold_pen = [[float(P[i]) for _, P in results] for i in range(len(cells))]
    if config.pooled:
        for r, fold_of in enumerate(partitions):
            pooled = np.full((len(cells), y.size), np.nan)
            for (rr, f), (S, _) in zip(keys, results):
                if rr == r:
                    pooled[:, fold_of == f] = S
            for i in range(len(cells)):
                fold_auc[i].append(auc(pooled[i], y))
                fold_acc[i].append(accuracy(pooled[i], y))
    else:
        for (r, f), (S, _) in zip(keys, results):
            y_ev = y[partitions[r] == f]
            for i in range(len(cells)):
                fold_auc[i].append(auc(S[i], y_ev))
                fold_acc[i].append(accuracy(S[i], y_ev))

    records = [CellRecord(c, fold_auc[i], fold_acc[i], fold_pen[i]) for i, c in enumerate(cells)]
    return CVResult(records, select_best(records), "cv", int(lab.size),
                    int(unl.size) if X_u is not None else 0)


def holdout_eval(config: ExperimentConfig, dataset: Dataset, cells=None, jobs: int = 1) -> CVResult:
    """Fit on a fresh stratified split per repeat and score its test set.

    Split ``r`` uses ``config.proportions`` and seed ``seed * 1000 + r``.
    """
    cells = expand_grid(config) if cells is None else list(cells)
    X, yall = dataset.features, dataset.labels
    opts = _opts(config)
    tasks, tests = [], []
    n_l = n_u = 0
    for r in range(config.repeats):
        sp = split(dataset, config.proportions, seed=config.seed * 1000 + r)
        if sp.test_idx.size == 0:
            raise ValueError("holdout evaluation needs a non-empty test fraction")
        X_u = X[sp.unlabeled_idx] if (sp.unlabeled_idx.size and config.method in SEMI_SUPERVISED) else None
        tasks.append((cells, X[sp.labeled_idx], yall[sp.labeled_idx], X_u, X[sp.test_idx], opts))
        tests.append(yall[sp.test_idx])
        n_l, n_u = sp.labeled_idx.size, (0 if X_u is None else X_u.shape[0])
    results = _run(tasks, jobs)
    fold_auc = [[] for _ in cells]
    fold_acc = [[] for _ in cells]
    fold_pen = [[float(P[i]) for _, P in results] for i in range(len(cells))]
    for (S, _), y_t in zip(results, tests):
        single = np.unique(y_t).size < 2
        for i in range(len(cells)):
            fold_auc[i].append(float("nan") if single else auc(S[i], y_t))
            fold_acc[i].append(accuracy(S[i], y_t))
    records = [CellRecord(c, fold_auc[i], fold_acc[i], fold_pen[i]) for i, c in enumerate(cells)]
    return CVResult(records, select_best(records), "holdout", int(n_l), int(n_u))


def grid_search(config: ExperimentConfig, dataset: Dataset, data_split: DataSplit | None = None,
                mode: str = "cv", jobs: int = 1) -> CVResult:
    """Evaluate every cell of the method's grid and select the best one.

    ``mode="cv"`` runs :func:`kfold_cv` on the labeled part of ``data_split``;
    ``mode="holdout"`` runs :func:`holdout_eval`.
    """
    cells = expand_grid(config)
    if not cells:
        raise ValueError(f"empty parameter grid for method {config.method}")
    if mode == "cv":
        res = kfold_cv(config, dataset, data_split, cells=cells, jobs=jobs)
    elif mode == "holdout":
        res = holdout_eval(config, dataset, cells=cells, jobs=jobs)
    else:
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if len(res.records) != len(cells):
        raise AssertionError("grid evaluation lost cells")
    return res


def heldout_auc(config: ExperimentConfig, dataset: Dataset, data_split: DataSplit, cell: Cell) -> float:
    """Refit ``cell`` on the whole labeled set and score the split's test set."""
    X, y = dataset.features, dataset.labels
    if data_split.test_idx.size == 0:
        return float("nan")
    y_t = y[data_split.test_idx]
    if np.unique(y_t).size < 2:
        return float("nan")
    X_u = X[data_split.unlabeled_idx] if (data_split.unlabeled_idx.size
                                          and config.method in SEMI_SUPERVISED) else None
    S, _ = _fold_task(([cell], X[data_split.labeled_idx], y[data_split.labeled_idx], X_u,
                    X[data_split.test_idx], _opts(config)))
    return auc(S[0], y_t)



