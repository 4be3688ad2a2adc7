"""
Independent reference implementations used by the tests.

Nothing here calls the package's solvers or V-matrix builders.  The
minimisers only see an objective's ``(value, gradient)`` callable; the
V-matrix and AUC references are literal loops over the defining sums.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def _lipschitz(grad, n, iters=500):
    # Hessian-vector products from gradient differences (exact for quadratics)
    g0 = grad(np.zeros(n))
    v = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        w = grad(v) - g0
        nw = np.linalg.norm(w)
        if nw == 0:
            return 1.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) < 1e-14 * abs(lam_new):
            break
        lam = lam_new
    return 1.05 * max(lam, nw)


def minimize_gd(fun, n, *, tol=1e-14, max_iter=500_000, x0=None):
    """Nesterov-accelerated gradient descent with adaptive restart.

    ``fun(x) -> (value, grad)``.  Stops when the gradient norm drops below
    ``tol`` times its initial value.
    """
    grad = lambda x: fun(x)[1]  # noqa: E731
    L = _lipschitz(grad, n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    y = x.copy()
    t = 1.0
    g_start = np.linalg.norm(grad(x)) or 1.0
    for _ in range(max_iter):
        g = grad(y)
        x_new = y - g / L
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        if (x_new - x) @ (y - x_new) > 0:
            t_new = 1.0
            y = x_new.copy()
        else:
            y = x_new + (t - 1) / t_new * (x_new - x)
        x, t = x_new, t_new
        if np.linalg.norm(grad(x)) <= tol * g_start:
            break
    return x


def projected_gd(fun, n, lo, hi, *, max_iter=200_000, tol=1e-13):
    """Plain projected gradient descent on a box, fixed step 1/L."""
    grad = lambda x: fun(x)[1]  # noqa: E731
    L = _lipschitz(grad, n)
    x = np.clip(np.zeros(n), lo, hi)
    for _ in range(max_iter):
        x_new = np.clip(x - grad(x) / L, lo, hi)
        if np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x)):
            return x_new
        x = x_new
    return x


def central_diff_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def indicator_v_two_products(X_l, X_all):
    """Sum over anchors of I(t >= x_i) I(t >= x_j), coordinatewise products."""
    n_l = len(X_l)
    V = [[0] * n_l for _ in range(n_l)]
    for i in range(n_l):
        for j in range(n_l):
            s = 0
            for t in X_all:
                a = all(th >= xh for th, xh in zip(t, X_l[i]))
                b = all(th >= xh for th, xh in zip(t, X_l[j]))
                s += int(a) * int(b)
            V[i][j] = s
    return np.array(V, dtype=float)


def indicator_v_max_form(X_l, X_all):
    """Sum over anchors of prod_h I(t_h - max(x_i^h, x_j^h))."""
    n_l = len(X_l)
    V = np.zeros((n_l, n_l))
    for i, j in itertools.product(range(n_l), repeat=2):
        s = 0
        for t in X_all:
            s += int(all(th - max(a, b) >= 0 for th, a, b in zip(t, X_l[i], X_l[j])))
        V[i, j] = s
    return V


def gaussian_v_naive(X_l, X_all, sigma):
    """Triple loop over (anchor, i, j); squared distances summed in coordinate order."""
    X_l = np.asarray(X_l, dtype=float)
    X_all = np.asarray(X_all, dtype=float)
    n_l, d = X_l.shape
    V = np.zeros((n_l, n_l))
    for t in X_all:
        dist = np.zeros(n_l)
        for i in range(n_l):
            s = 0.0
            for h in range(d):
                diff = t[h] - X_l[i, h]
                s = s + diff * diff
            dist[i] = s
        for i in range(n_l):
            for j in range(n_l):
                V[i, j] = V[i, j] + np.exp(-(dist[i] + dist[j]) / sigma)
    return V


def auc_pairs(scores, labels):
    """AUC by enumerating every (positive, negative) pair."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    twice = 0
    for p in pos:
        for q in neg:
            twice += 2 if p > q else (1 if p == q else 0)
    return (twice / 2) / (len(pos) * len(neg))


def bessel_ratio_mp(z, mu, dps=40):
    """Gamma(mu+1) (2/z)^mu J_mu(z) in high precision (1 at z = 0)."""
    import mpmath as mp

    with mp.workdps(dps):
        z = mp.mpf(z)
        if z == 0:
            return 1.0
        return float(mp.gamma(mu + 1) * (2 / z) ** mu * mp.besselj(mu, z))


def orthant_measure_grid(x_i, x_j, m=2000):
    """Midpoint-rule integral of I(T >= x_i) I(T >= x_j) over uniform [0, 1]^2."""
    g = (np.arange(m) + 0.5) / m
    lo = np.maximum(x_i, x_j)
    mass = [(g >= lo[h]).mean() for h in range(len(lo))]
    # the integrand factorises over coordinates
    return float(np.prod(mass))
