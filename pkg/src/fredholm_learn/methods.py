"""
The eight compared methods, as fold-level score producers.

A *cell* fixes every free parameter of one method.  :func:`fold_scores`
fits all cells of one method on a labeled training portion (plus the
unlabeled pool for the semi-supervised methods) and returns raw scores on
an evaluation set.  Gram matrices, V-matrices and Laplacians are built once
per fold and shared between the cells that need them.

======== =============================================================
KRLS     kernel regularised least squares
IV       V-risk with a supervised indicator V-matrix (CDF form by default)
GV       V-risk with a Gaussian V-matrix over the labeled points
SIV      V-risk with the indicator V-matrix over labeled + unlabeled
SGV      V-risk with the Gaussian V-matrix over labeled + unlabeled
FRED     Fredholm learning, same kernel for operator and expansion
MR       Laplacian-regularised least squares (manifold regularisation)
MSDF     Fredholm learning with separate operator and data kernels
======== =============================================================
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import solvers
from .kernels import KernelSpec, gram, resolve_sigma
from .solvers import GraphWeights, IllConditionedWarning
from .vmatrix import build_vmatrix, semi_gaussian_v, semi_indicator_v

logger = logging.getLogger(__name__)

METHODS = ("KRLS", "IV", "GV", "SIV", "SGV", "FRED", "MR", "MSDF")
SEMI_SUPERVISED = frozenset({"SIV", "SGV", "FRED", "MR", "MSDF"})


@dataclass(frozen=True)
class Cell:
    """One point of a method's parameter grid."""

    method: str
    lam: float
    kernel: KernelSpec
    operator: KernelSpec | None = None
    data: KernelSpec | None = None
    c1: float | None = None
    sigma_v: float | str | None = None

    @property
    def pair(self) -> str:
        """MSDF machine name ``M<op><data>``, empty for other methods."""
        if self.operator is None or self.data is None:
            return ""
        return f"M{self.operator.msdf_index}{self.data.msdf_index}"

    @property
    def cell_id(self) -> str:
        parts = [self.method, f"lam={self.lam:.6g}", f"K={self.kernel.label}"]
        if self.operator is not None:
            parts += [f"F={self.operator.label}", f"D={self.data.label}"]
        if self.c1 is not None:
            parts.append(f"c1={self.c1:.6g}")
        if self.sigma_v is not None:
            sv = self.sigma_v if isinstance(self.sigma_v, str) else f"{self.sigma_v:.6g}"
            parts.append(f"sv={sv}")
        return " ".join(parts)

    def params(self) -> dict:
        out = {"lambda": self.lam, "kernel": self.kernel.label}
        if self.operator is not None:
            out.update(operator=self.operator.label, data=self.data.label, pair=self.pair)
        if self.c1 is not None:
            out["c1"] = self.c1
        if self.sigma_v is not None:
            out["sigma_v"] = self.sigma_v
        return out


def _group(cells, key):
    groups: dict = {}
    for i, c in enumerate(cells):
        groups.setdefault(key(c), []).append(i)
    return groups


class _Fold:
    """Fold data plus a Gram-matrix cache keyed on (spec, row set, col set)."""

    def __init__(self, X_tr, y_tr, X_u, X_ev):
        self.sets = {
            "tr": np.asarray(X_tr, dtype=float),
            "ev": np.asarray(X_ev, dtype=float),
        }
        X_u = np.empty((0, self.sets["tr"].shape[1])) if X_u is None else np.asarray(X_u, float)
        self.sets["all"] = np.vstack([self.sets["tr"], X_u])
        self.y = np.asarray(y_tr, dtype=float)
        self.d = self.sets["tr"].shape[1]
        self._cache: dict = {}

    def gram(self, spec: KernelSpec, rows: str, cols: str) -> np.ndarray:
        spec = spec.resolve(self.d)
        key = (spec, rows, cols)
        if key not in self._cache:
            if rows == cols:
                self._cache[key] = gram(spec, self.sets[rows]).values
            else:
                self._cache[key] = gram(spec, self.sets[rows], self.sets[cols]).values
        return self._cache[key]


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (np.linalg.LinAlgError, ValueError) as exc:
        logger.debug("solve failed: %s", exc)
        return None


def _store(out, pen, i, K_ev, K, alpha):
    out[i] = K_ev @ alpha
    pen[i] = alpha @ (K @ alpha)


def _vrisk_scores(fold, cells, idx, V, out, pen):
    for k_spec, members in _group([cells[i] for i in idx], lambda c: c.kernel).items():
        K = fold.gram(k_spec, "tr", "tr")
        K_ev = fold.gram(k_spec, "ev", "tr")
        for m in members:
            model = _safe(solvers.solve_vrisk, K, V, fold.y, cells[idx[m]].lam)
            if model is not None:
                _store(out, pen, idx[m], K_ev, K, model.alpha)


def fold_scores(cells, X_tr, y_tr, X_u, X_ev, *, iv_form: str = "cdf",
                mr_weights: GraphWeights | None = None, box_constraint: bool = False,
                with_penalty: bool = False):
    """Raw scores of every cell on ``X_ev``; shape ``(len(cells), len(X_ev))``.

    Inputs are expected already normalised.  A cell whose linear system is
    singular gets a row of NaN.  With ``with_penalty`` the RKHS penalty
    ``alpha' K alpha`` of each fit is returned as well.
    """
    fold = _Fold(X_tr, y_tr, X_u, X_ev)
    n_ev = fold.sets["ev"].shape[0]
    out = np.full((len(cells), n_ev), np.nan)
    pen = np.full(len(cells), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        for method, idx in _group(cells, lambda c: c.method).items():
            _METHOD_FNS[method](fold, cells, idx, out, pen, iv_form=iv_form,
                                mr_weights=mr_weights, box_constraint=box_constraint)
    return (out, pen) if with_penalty else out


def _krls(fold, cells, idx, out, pen, **_):
    for k_spec, members in _group([cells[i] for i in idx], lambda c: c.kernel).items():
        K = fold.gram(k_spec, "tr", "tr")
        K_ev = fold.gram(k_spec, "ev", "tr")
        for m in members:
            model = _safe(solvers.solve_krls, K, fold.y, cells[idx[m]].lam)
            if model is not None:
                _store(out, pen, idx[m], K_ev, K, model.alpha)


def _iv(fold, cells, idx, out, pen, iv_form="cdf", **_):
    V = build_vmatrix(iv_form, fold.sets["tr"]).values
    _vrisk_scores(fold, cells, idx, V, out, pen)


def _gaussian_v(fold, cells, idx, out, pen, anchors):
    for sv, members in _group([cells[i] for i in idx], lambda c: c.sigma_v).items():
        s = resolve_sigma(sv, fold.d)
        V = semi_gaussian_v(fold.sets["tr"], fold.sets[anchors], s).values
        _vrisk_scores(fold, cells, [idx[m] for m in members], V, out, pen)


def _gv(fold, cells, idx, out, pen, **_):
    _gaussian_v(fold, cells, idx, out, pen, "tr")


def _sgv(fold, cells, idx, out, pen, **_):
    _gaussian_v(fold, cells, idx, out, pen, "all")


def _siv(fold, cells, idx, out, pen, **_):
    V = semi_indicator_v(fold.sets["tr"], fold.sets["all"]).values
    _vrisk_scores(fold, cells, idx, V, out, pen)


def _fred(fold, cells, idx, out, pen, **_):
    for k_spec, members in _group([cells[i] for i in idx], lambda c: c.kernel).items():
        K_F = fold.gram(k_spec, "tr", "all")
        K_H = fold.gram(k_spec, "all", "all")
        K_ev = fold.gram(k_spec, "ev", "all")
        for m in members:
            model = _safe(solvers.solve_fredholm, K_F, K_H, fold.y, cells[idx[m]].lam)
            if model is not None:
                _store(out, pen, idx[m], K_ev, K_H, model.alpha)


def _mr(fold, cells, idx, out, pen, mr_weights=None, **_):
    if mr_weights is None:
        mr_weights = GraphWeights(KernelSpec("gaussian", "1/d"), 10)
    n_all = fold.sets["all"].shape[0]
    k = mr_weights.n_neighbors
    if k is not None and k >= n_all:
        mr_weights = GraphWeights(mr_weights.kernel, max(1, n_all - 1))
    L = solvers.graph_laplacian(fold.sets["all"], mr_weights).values
    for k_spec, members in _group([cells[i] for i in idx], lambda c: c.kernel).items():
        K = fold.gram(k_spec, "all", "all")
        K_ev = fold.gram(k_spec, "ev", "all")
        for m in members:
            c = cells[idx[m]]
            model = _safe(solvers.solve_laprls, K, L, fold.y, c.c1, c.lam)
            if model is not None:
                _store(out, pen, idx[m], K_ev, K, model.alpha)


def _msdf(fold, cells, idx, out, pen, box_constraint=False, **_):
    sub = [cells[i] for i in idx]
    for (k_spec, op), members in _group(sub, lambda c: (c.kernel, c.operator)).items():
        K = fold.gram(k_spec, "all", "all")
        K_ev = fold.gram(k_spec, "ev", "all")
        K_F = fold.gram(op, "tr", "all")
        if box_constraint:
            for m in members:
                c = sub[m]
                K_D = fold.gram(c.data, "tr", "tr")
                model = _safe(solvers.solve_msdf_box, K_F, K, K_D, fold.y, c.lam)
                if model is not None:
                    _store(out, pen, idx[m], K_ev, K, model.alpha)
            continue
        datas = list(dict.fromkeys(sub[m].data for m in members))
        lams = list(dict.fromkeys(sub[m].lam for m in members))
        K_D = [fold.gram(ds, "tr", "tr") for ds in datas]
        path = solvers.msdf_path(K_F, K, K_D, fold.y, lams)
        for m in members:
            c = sub[m]
            A = path[lams.index(c.lam), datas.index(c.data)]
            if np.all(np.isfinite(A)):
                _store(out, pen, idx[m], K_ev, K, A)


_METHOD_FNS = {
    "KRLS": _krls,
    "IV": _iv,
    "GV": _gv,
    "SIV": _siv,
    "SGV": _sgv,
    "FRED": _fred,
    "MR": _mr,
    "MSDF": _msdf,
}
