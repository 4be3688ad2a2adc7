import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fredholm_learn.vmatrix import (
    VMatrixSpec,
    build_vmatrix,
    cdf_indicator_v,
    identity_v,
    semi_gaussian_v,
    semi_indicator_v,
    uniform_indicator_v,
)
from oracles import (
    gaussian_v_naive,
    indicator_v_max_form,
    indicator_v_two_products,
    orthant_measure_grid,
)


def col(*v):
    return np.array(v, dtype=float)[:, None]


# ---- fixtures enumerated by hand


def test_uniform_examples():
    assert uniform_indicator_v(col(0, 1)).values.tolist() == [[1, 0], [0, 0]]
    assert uniform_indicator_v(np.array([[3.0, -1.0, 2.0]])).values.tolist() == [[0]]
    V = uniform_indicator_v(np.array([[0.0, 0.0], [1.0, 1.0]])).values
    assert V.tolist() == [[1, 0], [0, 0]]


def test_uniform_additive():
    X = np.array([[0.0, 0.0], [1.0, 2.0]])
    V = uniform_indicator_v(X, additive=True).values
    # C = (1, 2): V11 = 1 + 2, V12 = V22 = 0
    assert V.tolist() == [[3, 0], [0, 0]]


def test_cdf_examples():
    assert cdf_indicator_v(col(0, 1)).values.tolist() == [[2, 1], [1, 1]]
    assert cdf_indicator_v(col(7)).values.tolist() == [[1]]
    assert cdf_indicator_v(col(3, 3)).values.tolist() == [[2, 2], [2, 2]]


def test_semi_indicator_examples():
    X_l = col(0, 1)
    assert semi_indicator_v(X_l, np.vstack([X_l, col(0.5)])).values.tolist() == [[3, 1], [1, 1]]
    assert semi_indicator_v(X_l, X_l).values.tolist() == [[2, 1], [1, 1]]
    assert semi_indicator_v(col(0), col(0, -1, -2)).values.tolist() == [[1]]


def test_semi_gaussian_examples():
    assert semi_gaussian_v(col(0), col(0), 1.0).values.tolist() == [[1.0]]
    V = semi_gaussian_v(col(0, 1), col(0, 1), 1.0).values
    e = math.exp(-1)
    assert V[0, 1] == pytest.approx(2 * e, abs=1e-15)
    assert V[0, 1] == pytest.approx(0.735759, abs=1e-6)
    # anchor 1 contributes exp(-(1 + 1)) to the diagonal entry of point 0
    assert V[0, 0] == pytest.approx(1 + math.exp(-2), abs=1e-15)
    big = semi_gaussian_v(col(0, 1, 2), col(0, 1, 2, 3), 1e12).values
    np.testing.assert_allclose(big, 4.0, atol=1e-6)


def test_identity():
    assert identity_v(1).values.tolist() == [[1]]
    np.testing.assert_array_equal(identity_v(3).values, np.eye(3))
    with pytest.raises(ValueError):
        identity_v(0)


def test_errors():
    with pytest.raises(ValueError, match="anchor"):
        semi_indicator_v(col(0, 1), col(0, 2))
    with pytest.raises(ValueError, match="anchor"):
        semi_gaussian_v(col(0, 1), col(1), 1.0)
    with pytest.raises(ValueError, match="sigma"):
        semi_gaussian_v(col(0), col(0), 0.0)
    with pytest.raises(ValueError, match="kind"):
        build_vmatrix("bogus", col(0))
    with pytest.raises(ValueError):
        VMatrixSpec("bogus")
    with pytest.raises(ValueError, match="sigma"):
        build_vmatrix("semi_gaussian", col(0))


def test_build_dispatch():
    X = col(0, 1)
    assert build_vmatrix("cdf", X).values.tolist() == [[2, 1], [1, 1]]
    assert build_vmatrix("semi-indicator", X, np.vstack([X, col(0.5)])).spec.n_anchors == 3
    assert build_vmatrix("identity", X).values.tolist() == [[1, 0], [0, 1]]


# ---- properties

small = st.integers(1, 8)


@st.composite
def labeled_and_pool(draw, max_l=8, max_u=12, max_d=4, grid=True):
    d = draw(st.integers(1, max_d))
    n_l = draw(st.integers(1, max_l))
    n_u = draw(st.integers(0, max_u))
    # coarse integer grids produce plenty of ties, the interesting case for I(0) = 1
    elems = st.integers(-3, 3).map(float) if grid else st.floats(-3, 3, allow_nan=False)
    X_l = draw(arrays(np.float64, (n_l, d), elements=elems))
    X_u = draw(arrays(np.float64, (n_u, d), elements=elems))
    return X_l, X_u


@given(labeled_and_pool())
def test_product_form_equals_max_form(data):
    X_l, X_u = data
    X_all = np.vstack([X_l, X_u])
    two = indicator_v_two_products(X_l.tolist(), X_all.tolist())
    mx = indicator_v_max_form(X_l.tolist(), X_all.tolist())
    assert np.array_equal(two, mx)
    assert np.array_equal(semi_indicator_v(X_l, X_all).values, mx)


@given(labeled_and_pool())
def test_semi_indicator_reduces_to_cdf(data):
    X_l, _ = data
    assert np.array_equal(semi_indicator_v(X_l, X_l).values, cdf_indicator_v(X_l).values)


@given(labeled_and_pool(grid=False), st.floats(0.1, 10))
def test_psd_symmetric_nonnegative(data, sigma):
    X_l, X_u = data
    X_all = np.vstack([X_l, X_u])
    for V in (semi_indicator_v(X_l, X_all).values, semi_gaussian_v(X_l, X_all, sigma).values):
        assert np.array_equal(V, V.T)
        assert V.min() >= 0
        assert np.linalg.eigvalsh(V).min() >= -1e-10


@given(labeled_and_pool(grid=False))
def test_uniform_and_cdf_symmetric_nonnegative(data):
    X_l, _ = data
    for V in (uniform_indicator_v(X_l).values, uniform_indicator_v(X_l, True).values,
              cdf_indicator_v(X_l).values):
        assert np.array_equal(V, V.T)
        assert V.min() >= 0


@given(labeled_and_pool(max_u=6), st.floats(0.2, 5))
def test_monotone_growth(data, sigma):
    X_l, X_u = data
    rng = np.random.default_rng(0)
    extra = rng.integers(-3, 4, size=(1, X_l.shape[1])).astype(float)
    X_all = np.vstack([X_l, X_u])
    X_more = np.vstack([X_all, extra])
    assert np.all(semi_indicator_v(X_l, X_more).values >= semi_indicator_v(X_l, X_all).values)
    g0 = semi_gaussian_v(X_l, X_all, sigma).values
    g1 = semi_gaussian_v(X_l, X_more, sigma).values
    assert np.all(g1 >= g0)
    # the new anchor adds exp(-.) > 0 everywhere; visible wherever it exceeds rounding
    dist = ((extra - X_l) ** 2).sum(axis=1)
    inc = np.exp(-(dist[:, None] + dist[None, :]) / sigma)
    visible = inc > 4 * np.finfo(float).eps * g0
    assert np.all(g1[visible] > g0[visible])


@given(labeled_and_pool(), st.randoms(use_true_random=False))
def test_permutation_equivariance(data, rnd):
    X_l, X_u = data
    p = list(range(len(X_l)))
    rnd.shuffle(p)
    q = list(range(len(X_u)))
    rnd.shuffle(q)
    base_i = semi_indicator_v(X_l, np.vstack([X_l, X_u])).values
    base_g = semi_gaussian_v(X_l, np.vstack([X_l, X_u]), 1.3).values
    Xp = X_l[p]
    perm_i = semi_indicator_v(Xp, np.vstack([Xp, X_u[q]])).values
    assert np.array_equal(perm_i, base_i[np.ix_(p, p)])
    # same anchor order, so the Gaussian sums are bitwise comparable
    perm_g = semi_gaussian_v(Xp, np.vstack([X_l, X_u]), 1.3).values
    assert np.array_equal(perm_g, base_g[np.ix_(p, p)])
    # reordering the pool changes the summation order, hence last-bit effects only
    np.testing.assert_allclose(semi_gaussian_v(X_l, np.vstack([X_l, X_u[q]]), 1.3).values,
                               base_g, rtol=1e-13)


def test_blocked_gaussian_bitwise_equals_naive(rng):
    # more anchors than one block so the block boundary is crossed
    X_l = rng.normal(size=(7, 3))
    X_all = np.vstack([X_l, rng.normal(size=(600, 3))])
    assert np.array_equal(semi_gaussian_v(X_l, X_all, 2.5).values,
                          gaussian_v_naive(X_l, X_all, 2.5))


def test_blocked_indicator_equals_naive(rng):
    X_l = rng.integers(0, 4, size=(6, 2)).astype(float)
    X_all = np.vstack([X_l, rng.integers(0, 4, size=(520, 2)).astype(float)])
    assert np.array_equal(semi_indicator_v(X_l, X_all).values,
                          indicator_v_max_form(X_l.tolist(), X_all.tolist()))


def _convergence_error(n, seed, X_l):
    rng = np.random.default_rng(seed)
    X_all = np.vstack([X_l, rng.uniform(size=(n - len(X_l), 2))])
    V = semi_indicator_v(X_l, X_all).values / n
    ref = np.array([[orthant_measure_grid(a, b) for b in X_l] for a in X_l])
    return np.abs(V - ref).max()


def convergence_ratio(seeds=20):
    X_l = np.random.default_rng(99).uniform(size=(6, 2))
    e100 = np.mean([_convergence_error(100, s, X_l) for s in range(seeds)])
    e400 = np.mean([_convergence_error(400, s, X_l) for s in range(seeds)])
    return e100, e400


def test_empirical_convergence():
    e100, e400 = convergence_ratio()
    assert e100 / e400 >= 1.5
