"""
V-matrices: mutual-position weights of labeled observations.

A V-matrix is the n_l x n_l matrix of inner products
``<K(T, x_i), K(T, x_j)>`` under a measure over anchor points ``T``.  It
replaces the identity weighting of least squares in the V-risk
``(Y - f)^T V (Y - f)``.

Builders
--------
uniform_indicator_v   Lebesgue measure on the box up to the coordinate maxima
cdf_indicator_v       empirical measure of the labeled points
semi_indicator_v      empirical measure of labeled + unlabeled anchors
semi_gaussian_v       Gaussian factor kernel, labeled + unlabeled anchors
identity_v            plain least squares

None of the builders divides by the anchor count; the scale is absorbed by
the regularisation weight.  Indicator ties use I(0) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "V_KINDS",
    "VMatrixSpec",
    "VMatrix",
    "uniform_indicator_v",
    "cdf_indicator_v",
    "semi_indicator_v",
    "semi_gaussian_v",
    "identity_v",
    "build_vmatrix",
]

V_KINDS = (
    "uniform",
    "uniform_additive",
    "cdf",
    "semi_indicator",
    "semi_gaussian",
    "identity",
)

# anchors processed per block; bounds the (block, n_l, d) comparison tensor
_ANCHOR_BLOCK = 256


@dataclass(frozen=True)
class VMatrixSpec:
    kind: str
    sigma: float | None = None
    anchor_points: str | None = None
    n_anchors: int | None = None

    def __post_init__(self):
        if self.kind not in V_KINDS:
            raise ValueError(f"unknown V-matrix kind {self.kind!r}; expected one of {V_KINDS}")


@dataclass(frozen=True, eq=False)
class VMatrix:
    values: np.ndarray
    spec: VMatrixSpec

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape


def _points(X, name="X_l") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array of points")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def _check_anchors(X_l: np.ndarray, X_all: np.ndarray) -> None:
    if X_all.shape[1] != X_l.shape[1]:
        raise ValueError(f"dimension mismatch: labeled d={X_l.shape[1]}, anchors d={X_all.shape[1]}")
    if X_all.shape[0] < X_l.shape[0]:
        raise ValueError("anchor set is smaller than the labeled set")
    # every labeled point must itself be an anchor
    anchors = {row.tobytes() for row in np.ascontiguousarray(X_all)}
    for row in np.ascontiguousarray(X_l):
        if row.tobytes() not in anchors:
            raise ValueError("anchor set does not contain all labeled points")


def uniform_indicator_v(X_l, additive: bool = False) -> VMatrix:
    """Uniform-measure indicator V-matrix.

    ``V_ij = prod_k (C^k - max(x_i^k, x_j^k))`` with ``C^k`` the largest
    labeled value of coordinate k; ``additive=True`` sums over coordinates
    instead of multiplying.
    """
    X = _points(X_l)
    C = X.max(axis=0)
    n, d = X.shape
    V = np.zeros((n, n)) if additive else np.ones((n, n))
    for k in range(d):
        term = C[k] - np.maximum.outer(X[:, k], X[:, k])
        if additive:
            V += term
        else:
            V *= term
    kind = "uniform_additive" if additive else "uniform"
    return VMatrix(V, VMatrixSpec(kind, n_anchors=n))


def _indicator_counts(X_l: np.ndarray, X_all: np.ndarray) -> np.ndarray:
    # V = Phi^T Phi with Phi[k, i] = prod_h I(x_k^h >= x_i^h); integer
    # accumulation makes the result independent of blocking
    n_l = X_l.shape[0]
    V = np.zeros((n_l, n_l), dtype=np.int64)
    for start in range(0, X_all.shape[0], _ANCHOR_BLOCK):
        A = X_all[start:start + _ANCHOR_BLOCK]
        phi = np.all(A[:, None, :] >= X_l[None, :, :], axis=2).astype(np.int64)
        V += phi.T @ phi
    return V


def cdf_indicator_v(X_l) -> VMatrix:
    """Empirical-CDF indicator V-matrix over the labeled points.

    ``V_ij = sum_t prod_k I(x_t^k - max(x_i^k, x_j^k))``.
    """
    X = _points(X_l)
    V = _indicator_counts(X, X).astype(float)
    return VMatrix(V, VMatrixSpec("cdf", n_anchors=X.shape[0]))


def semi_indicator_v(X_l, X_all) -> VMatrix:
    """Indicator V-matrix with labeled and unlabeled anchors.

    ``X_all`` holds the labeled points followed (in any order) by the
    unlabeled pool.  Entry ``(i, j)`` counts the anchors that dominate both
    ``x_i`` and ``x_j`` in every coordinate.
    """
    X_l = _points(X_l)
    X_all = _points(X_all, "X_all")
    _check_anchors(X_l, X_all)
    V = _indicator_counts(X_l, X_all).astype(float)
    return VMatrix(V, VMatrixSpec("semi_indicator", n_anchors=X_all.shape[0]))


def _sq_dists_sequential(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # accumulate coordinates in order so every entry has a fixed summation order
    D = np.zeros((A.shape[0], B.shape[0]))
    for h in range(A.shape[1]):
        diff = A[:, h, None] - B[None, :, h]
        D += diff * diff
    return D


def semi_gaussian_v(X_l, X_all, sigma: float) -> VMatrix:
    """Gaussian V-matrix with labeled and unlabeled anchors.

    ``V_ij = sum_k exp(-(|x_k - x_i|^2 + |x_k - x_j|^2) / sigma)`` where
    ``sigma`` plays the role of the squared width.  Anchors are accumulated
    one at a time in index order, so the result does not depend on the block
    size.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    X_l = _points(X_l)
    X_all = _points(X_all, "X_all")
    _check_anchors(X_l, X_all)
    n_l = X_l.shape[0]
    V = np.zeros((n_l, n_l))
    for start in range(0, X_all.shape[0], _ANCHOR_BLOCK):
        D = _sq_dists_sequential(X_all[start:start + _ANCHOR_BLOCK], X_l)
        for row in D:
            V += np.exp(-(row[:, None] + row[None, :]) / sigma)
    return VMatrix(V, VMatrixSpec("semi_gaussian", sigma=float(sigma), n_anchors=X_all.shape[0]))


def identity_v(n_l: int) -> VMatrix:
    if int(n_l) != n_l or n_l < 1:
        raise ValueError(f"n_l must be a positive integer, got {n_l}")
    return VMatrix(np.eye(int(n_l)), VMatrixSpec("identity", n_anchors=int(n_l)))


def build_vmatrix(kind: str, X_l, X_all=None, sigma: float | None = None) -> VMatrix:
    """Dispatch on ``kind`` (one of :data:`V_KINDS`)."""
    kind = kind.replace("-", "_")
    if kind == "uniform":
        return uniform_indicator_v(X_l)
    if kind == "uniform_additive":
        return uniform_indicator_v(X_l, additive=True)
    if kind == "cdf":
        return cdf_indicator_v(X_l)
    if kind == "identity":
        return identity_v(_points(X_l).shape[0])
    X_all = X_l if X_all is None else X_all
    if kind == "semi_indicator":
        return semi_indicator_v(X_l, X_all)
    if kind == "semi_gaussian":
        if sigma is None:
            raise ValueError("semi_gaussian requires sigma")
        return semi_gaussian_v(X_l, X_all, sigma)
    raise ValueError(f"unknown V-matrix kind {kind!r}; expected one of {V_KINDS}")
