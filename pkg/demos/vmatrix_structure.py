"""
What a V-matrix looks like
==========================

The indicator V-matrix counts the anchors that dominate both points of a
pair. Divided by the number of anchors, it estimates the probability mass of
the orthant above both points. This script prints small matrices, then shows
the estimate approaching that mass as more unlabeled anchors are added.
"""

import numpy as np

from fredholm_learn import cdf_indicator_v, semi_gaussian_v, semi_indicator_v

x = np.array([[0.0], [1.0]])
print("CDF V-matrix of {0, 1}:\n", cdf_indicator_v(x).values)
print("adding the anchor 0.5:\n", semi_indicator_v(x, np.vstack([x, [[0.5]]])).values)
print("Gaussian V-matrix, sigma=1:\n", semi_gaussian_v(x, x, 1.0).values.round(6))

###############################################################################
# Each anchor adds one rank-one outer product, so the matrices stay positive
# semidefinite.

rng = np.random.default_rng(0)
X_l = rng.uniform(size=(6, 2))
for n in (50, 200, 800):
    X_all = np.vstack([X_l, rng.uniform(size=(n - 6, 2))])
    V = semi_indicator_v(X_l, X_all).values
    print(f"n={n:4d}  min eigenvalue {np.linalg.eigvalsh(V).min():9.3f}")

###############################################################################
# For uniform data on the unit square the orthant mass above a and b is
# (1 - max(a1, b1)) (1 - max(a2, b2)).

exact = np.prod(1 - np.maximum(X_l[:, None, :], X_l[None, :, :]), axis=2)
for n in (100, 400, 1600, 6400):
    errs = []
    for seed in range(10):
        r = np.random.default_rng([seed, n])
        X_all = np.vstack([X_l, r.uniform(size=(n - 6, 2))])
        errs.append(np.abs(semi_indicator_v(X_l, X_all).values / n - exact).max())
    print(f"n={n:5d}  mean max error {np.mean(errs):.4f}")
