"""
Few labels, many unlabeled points
=================================

Two interleaved half-moons with six labeled points. KRLS sees only those six
points. The Fredholm, MSDF and Laplacian fits also use the unlabeled points
to build their operators. Each fit is scored by AUC on a fresh sample.
"""

import numpy as np

from fredholm_learn import (
    KernelSpec,
    auc,
    graph_laplacian,
    gram,
    solve_fredholm,
    solve_krls,
    solve_laprls,
    solve_msdf,
)
from fredholm_learn.solvers import GraphWeights


def moons(n, rng, noise=0.08):
    t = rng.uniform(0, np.pi, n)
    upper = np.arange(n) % 2 == 0
    x = np.where(upper, np.cos(t), 1 - np.cos(t))
    y = np.where(upper, np.sin(t), 0.5 - np.sin(t))
    return np.column_stack([x, y]) + noise * rng.normal(size=(n, 2)), upper.astype(float)


rng = np.random.default_rng(3)
X_l, y = moons(6, rng)
X_u, _ = moons(300, rng)
X_te, y_te = moons(400, rng)
X_all = np.vstack([X_l, X_u])
n_l = len(y)

###############################################################################
# Every fit below shares the target kernel and lambda.

k = KernelSpec("gaussian", 4.0)
lam = 1e-3
K_l = gram(k, X_l).values
K_all = gram(k, X_all).values

scores = {}
a = solve_krls(K_l, y, lam).alpha
scores["KRLS"] = gram(k, X_te, X_l).values @ a

# Fredholm learning: the operator kernel integrates over all points
K_F = gram(k, X_l, X_all).values
a = solve_fredholm(K_F, K_all, y, lam).alpha
scores["FRED"] = gram(k, X_te, X_all).values @ a

# MSDF: a wide Laplacian operator, a Gaussian data function on the labels
K_F = gram(KernelSpec("laplacian", 1.0), X_l, X_all).values
K_D = gram(KernelSpec("gaussian", 1.0), X_l).values
a = solve_msdf(K_F, K_all, K_D, y, lam).alpha
scores["MSDF"] = gram(k, X_te, X_all).values @ a

# Laplacian regularisation on a 10-nearest-neighbour graph
L = graph_laplacian(X_all, GraphWeights(KernelSpec("gaussian", 10.0), 10)).values
a = solve_laprls(K_all, L, y, 1.0, lam).alpha
scores["MR"] = gram(k, X_te, X_all).values @ a

for name, s in scores.items():
    print(f"{name:5s} test AUC {auc(s, y_te):.3f}")
print(f"{n_l} labeled, {len(X_u)} unlabeled, {len(X_te)} test points")
