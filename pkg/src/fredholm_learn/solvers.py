"""
Closed-form minimisers for the risk functionals, and prediction.

All solvers return a :class:`ModelCoefficients` whose ``alpha`` expands the
estimate over ``expansion_points`` with the kernel ``kernel``:

    f(x) = sum_i alpha_i k(x, p_i)

============== ========================================================== =====================================
solver          objective (in alpha)                                       normal equations
============== ========================================================== =====================================
solve_krls      |Y - K a|^2 + lam a'K a                                     (K + lam I) a = Y
solve_vrisk     (Y - K a)'V(Y - K a) + lam a'K a                            (V K + lam I) a = V Y
solve_fredholm  |K_F K_H a - Y|^2 + lam a'K_H a                              (K_F'K_F K_H + lam I) a = K_F'Y
solve_msdf      |K_F K a|^2 - 2 (K_F K a)'K_D Y + lam a'K a                  (K_F'K_F K + lam I) a = K_F'K_D Y
solve_laprls    |J K a - Y|^2 + (c1/n) (K a)'L(K a) + c2 a'K a             (J K + (c1/n) L K + c2 I) a = J Y
============== ========================================================== =====================================

Constant prefactors such as 1/n_l are folded into ``lam``.  The MSDF cross
term carries the factor 2 so that the closed form above is its exact
stationary point.  Each normal equation is the gradient condition with the
common left factor ``K`` cancelled, which requires ``K`` nonsingular;
:func:`solve_vrisk` falls back to the uncancelled system when the reduced
one is singular.

The ``*_objective`` functions return ``(value, gradient)`` and are what the
test-suite's independent gradient-descent oracles minimise.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from .kernels import GramMatrix, KernelSpec, gram

logger = logging.getLogger(__name__)

__all__ = [
    "ModelCoefficients",
    "LaplacianMatrix",
    "GraphWeights",
    "IllConditionedWarning",
    "solve_krls",
    "solve_vrisk",
    "solve_fredholm",
    "solve_msdf",
    "solve_msdf_box",
    "msdf_path",
    "graph_laplacian",
    "solve_laprls",
    "predict",
    "predict_raw",
    "krls_objective",
    "vrisk_objective",
    "fredholm_objective",
    "msdf_objective",
    "laprls_objective",
]

COND_WARN = 1e12


class IllConditionedWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ModelCoefficients:
    alpha: np.ndarray
    expansion_points: np.ndarray | None
    kernel: KernelSpec | None
    method: str
    lam: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1:
            raise ValueError("alpha must be a vector")
        if not np.all(np.isfinite(a)):
            raise ValueError("alpha contains non-finite entries")
        if self.expansion_points is not None and len(self.expansion_points) != a.size:
            raise ValueError(
                f"alpha has {a.size} entries but there are {len(self.expansion_points)} expansion points"
            )
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class GraphWeights:
    """Adjacency weighting for the graph Laplacian.

    Weights are ``kernel(x_i, x_j)``; when ``n_neighbors`` is set only
    pairs in each other's k-nearest-neighbour lists (union) keep a weight.
    """

    kernel: KernelSpec
    n_neighbors: int | None = None


@dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    values: np.ndarray
    weight_spec: GraphWeights
    weights: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _mat(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    return A


def _vec(y, name: str) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def _check_symmetric(A: np.ndarray, name: str, tol: float = 1e-10) -> None:
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise ValueError(f"{name} is not symmetric")


def _dense_solve(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    """LU with partial pivoting; warns when the condition number exceeds 1e12."""
    if not np.all(np.isfinite(A)):
        raise np.linalg.LinAlgError(f"{what}: system matrix has non-finite entries")
    anorm = np.linalg.norm(A, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        raise np.linalg.LinAlgError(f"{what}: system matrix is singular (zero pivot)")
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if rcond == 0.0 or not np.isfinite(rcond):
        raise np.linalg.LinAlgError(f"{what}: system matrix is numerically singular (rcond=0)")
    if 1.0 / rcond > COND_WARN:
        warnings.warn(
            f"{what}: condition number ~{1.0 / rcond:.2e} exceeds {COND_WARN:.0e}",
            IllConditionedWarning,
            stacklevel=3,
        )
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError(f"{what}: solution is not finite")
    return x


# ---------------------------------------------------------------------------
# objectives (value, gradient)
# ---------------------------------------------------------------------------


def krls_objective(alpha, K, Y, lam):
    K = _mat(K, "K")
    r = Y - K @ alpha
    Ka = K @ alpha
    val = r @ r + lam * alpha @ Ka
    grad = -2.0 * K.T @ r + 2.0 * lam * Ka
    return float(val), grad


def vrisk_objective(alpha, K, V, Y, lam):
    K = _mat(K, "K")
    V = _mat(V, "V")
    r = Y - K @ alpha
    Vr = V @ r
    Ka = K @ alpha
    val = r @ Vr + lam * alpha @ Ka
    grad = -K.T @ ((V + V.T) @ r) + 2.0 * lam * Ka
    return float(val), grad


def fredholm_objective(alpha, K_F, K_H, Y, lam):
    K_F = _mat(K_F, "K_F")
    K_H = _mat(K_H, "K_H")
    f = K_H @ alpha
    r = K_F @ f - Y
    val = r @ r + lam * alpha @ f
    grad = 2.0 * K_H.T @ (K_F.T @ r) + 2.0 * lam * f
    return float(val), grad


def msdf_objective(A, K_F, K, K_D, Y, lam):
    """MSDF risk without the constant ``Y'K_D'K_D Y`` term."""
    K_F = _mat(K_F, "K_F")
    K = _mat(K, "K")
    K_D = _mat(K_D, "K_D")
    KA = K @ A
    z = K_F @ KA
    g = K_D @ Y
    val = z @ z - 2.0 * z @ g + lam * A @ KA
    grad = 2.0 * K.T @ (K_F.T @ (z - g)) + 2.0 * lam * KA
    return float(val), grad


def laprls_objective(alpha, K, L, Y, c1, c2):
    K = _mat(K, "K")
    L = _mat(L, "L")
    n = K.shape[0]
    n_l = Y.size
    f = K @ alpha
    r = f[:n_l] - Y
    Lf = L @ f
    val = r @ r + (c1 / n) * f @ Lf + c2 * alpha @ f
    rp = np.zeros(n)
    rp[:n_l] = r
    grad = 2.0 * K.T @ rp + (c1 / n) * K.T @ ((L + L.T) @ f) + 2.0 * c2 * f
    return float(val), grad


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _gram_parts(G):
    if isinstance(G, GramMatrix):
        return G.values, G.spec
    return _mat(G, "K"), None


def solve_krls(K, Y, lam: float, *, points=None) -> ModelCoefficients:
    """Kernel regularised least squares, ``(K + lam I) alpha = Y``.

    ``lam = 0`` is accepted when ``K`` is numerically nonsingular, in which
    case the fit interpolates the labels.
    """
    Kv, spec = _gram_parts(K)
    Y = _vec(Y, "Y")
    _check_symmetric(Kv, "K")
    if Kv.shape[0] != Y.size:
        raise ValueError(f"K is {Kv.shape} but Y has {Y.size} entries")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    try:
        alpha = _dense_solve(Kv + lam * np.eye(Y.size), Y, "krls")
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"KRLS system K + {lam} I is singular or too ill-conditioned to solve: {exc}"
        ) from exc
    return ModelCoefficients(alpha, points, spec, "krls", float(lam))


def solve_vrisk(K, V, Y, lam: float, *, points=None) -> ModelCoefficients:
    """Minimise the V-risk ``(Y - K a)' V (Y - K a) + lam a' K a``.

    Solves the reduced system ``(V K + lam I) a = V Y``.  If that fails the
    canonical normal equations ``(K V K + lam K) a = K V Y`` are solved with a
    1e-10 ridge added to ``K``; ``info["fallback"]`` records this.
    """
    Kv, spec = _gram_parts(K)
    Vv = _mat(V, "V")
    Y = _vec(Y, "Y")
    _check_symmetric(Kv, "K")
    _check_symmetric(Vv, "V")
    n = Y.size
    if Kv.shape != (n, n) or Vv.shape != (n, n):
        raise ValueError(f"shape mismatch: K {Kv.shape}, V {Vv.shape}, Y {n}")
    if not lam > 0:
        raise ValueError("lam must be positive")
    info = {"fallback": False}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", IllConditionedWarning)
            alpha = _dense_solve(Vv @ Kv + lam * np.eye(n), Vv @ Y, "vrisk")
    except (np.linalg.LinAlgError, IllConditionedWarning) as exc:
        logger.info("vrisk reduced system failed (%s); using canonical normal equations", exc)
        Kr = Kv + 1e-10 * np.eye(n)
        KV = Kr @ Vv
        alpha = _dense_solve(KV @ Kr + lam * Kr, KV @ Y, "vrisk canonical")
        info = {"fallback": True, "ridge": 1e-10, "reason": str(exc)}
    return ModelCoefficients(alpha, points, spec, "vrisk", float(lam), info)


def solve_fredholm(K_F, K_H, Y, lam: float, *, points=None) -> ModelCoefficients:
    """Fredholm learning, ``alpha = (K_F' K_F K_H + lam I)^{-1} K_F' Y``.

    ``K_F`` is n_l x n (labeled rows, all-point columns); the expansion runs
    over all n points with kernel ``K_H``.
    """
    KF = _mat(K_F, "K_F")
    KH, spec = _gram_parts(K_H)
    Y = _vec(Y, "Y")
    _check_symmetric(KH, "K_H")
    n_l, n = KF.shape
    if KH.shape != (n, n) or Y.size != n_l:
        raise ValueError(f"shape mismatch: K_F {KF.shape}, K_H {KH.shape}, Y {Y.size}")
    if not lam > 0:
        raise ValueError("lam must be positive")
    alpha = _dense_solve(KF.T @ KF @ KH + lam * np.eye(n), KF.T @ Y, "fredholm")
    return ModelCoefficients(alpha, points, spec, "fredholm", float(lam))


def _msdf_check(KF, Kt, KD, Y):
    n_l, n = KF.shape
    if Kt.shape != (n, n):
        raise ValueError(f"K must be {n}x{n} to match K_F {KF.shape}, got {Kt.shape}")
    if KD.shape != (n_l, n_l):
        raise ValueError(f"K_D must be {n_l}x{n_l}, got {KD.shape}")
    if Y.size != n_l:
        raise ValueError(f"Y must have {n_l} entries, got {Y.size}")


def solve_msdf(K_F, K, K_D, Y, lam: float, *, points=None) -> ModelCoefficients:
    """MSDF closed form ``A = (K_F' K_F K + lam I)^{-1} K_F' K_D Y``.

    The output box ``0 <= K A <= 1`` is not imposed here; :func:`predict`
    clips, and :func:`solve_msdf_box` solves the constrained problem.
    """
    KF = _mat(K_F, "K_F")
    Kt, spec = _gram_parts(K)
    KD = _mat(K_D, "K_D")
    Y = _vec(Y, "Y")
    _check_symmetric(Kt, "K")
    _msdf_check(KF, Kt, KD, Y)
    if not lam > 0:
        raise ValueError("lam must be positive")
    n = Kt.shape[0]
    A = _dense_solve(KF.T @ KF @ Kt + lam * np.eye(n), KF.T @ (KD @ Y), "msdf")
    return ModelCoefficients(A, points, spec, "msdf", float(lam))


def msdf_path(K_F, K, K_D_list, Y, lams) -> np.ndarray:
    """MSDF coefficients for several data kernels and regularisation weights.

    Same closed form as :func:`solve_msdf`, sharing ``K_F' K_F K`` and one
    factorisation per ``lam`` across the data kernels.  Returns an array of
    shape ``(len(lams), len(K_D_list), n)``; a singular system yields NaN.
    """
    KF = _mat(K_F, "K_F")
    Kt = _mat(K, "K")
    Y = _vec(Y, "Y")
    n = Kt.shape[0]
    M = KF.T @ KF @ Kt
    rhs = np.column_stack([KF.T @ (_mat(KD, "K_D") @ Y) for KD in K_D_list])
    out = np.full((len(lams), len(K_D_list), n), np.nan)
    eye = np.eye(n)
    for i, lam in enumerate(lams):
        try:
            out[i] = _dense_solve(M + lam * eye, rhs, "msdf").T
        except np.linalg.LinAlgError as exc:
            logger.debug("msdf path: lam=%g failed: %s", lam, exc)
    return out


def _power_iteration(matvec, n: int, iters: int = 200, seed: int = 0) -> float:
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - est) <= 1e-12 * abs(new):
            est = new
            break
        est = new
    # Rayleigh estimates approach from below; pad so 1/L is a safe step
    return 1.01 * max(est, nw)


def solve_msdf_box(K_F, K, K_D, Y, lam: float, *, points=None, max_iter: int = 10_000,
                   tol: float = 1e-9, jitter: float = 1e-12) -> ModelCoefficients:
    """MSDF with the box constraint ``0 <= K A <= 1`` on the training outputs.

    Works in the output variables ``z = K A`` (``K`` must be positive
    definite) and runs accelerated projected gradient with step ``1/L``,
    ``L`` the largest Hessian eigenvalue from power iteration.  Stops when
    the iterate moves less than ``tol`` (relative) or after ``max_iter``
    steps; ``info`` reports iterations and convergence.
    """
    KF = _mat(K_F, "K_F")
    Kt, spec = _gram_parts(K)
    KD = _mat(K_D, "K_D")
    Y = _vec(Y, "Y")
    _check_symmetric(Kt, "K")
    _msdf_check(KF, Kt, KD, Y)
    n = Kt.shape[0]
    cho = sla.cho_factor(Kt + jitter * np.eye(n))
    Q = KF.T @ KF
    b = KF.T @ (KD @ Y)

    # objective in z: z'Qz - 2 z'b + lam z'K^{-1}z
    def grad(z):
        return 2.0 * (Q @ z - b) + 2.0 * lam * sla.cho_solve(cho, z)

    L = _power_iteration(lambda v: 2.0 * (Q @ v) + 2.0 * lam * sla.cho_solve(cho, v), n)
    step = 1.0 / L
    z = np.zeros(n)
    y = z.copy()
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z_new = np.clip(y - step * grad(y), 0.0, 1.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        # restart momentum when it points uphill
        if (z_new - z) @ (y - z_new) > 0:
            t_new = 1.0
            y = z_new.copy()
        else:
            y = z_new + ((t - 1.0) / t_new) * (z_new - z)
        move = np.linalg.norm(z_new - z)
        z, t = z_new, t_new
        if move <= tol * max(1.0, np.linalg.norm(z)):
            converged = True
            break
    A = sla.cho_solve(cho, z)
    info = {"iterations": it, "converged": converged, "lipschitz": L}
    return ModelCoefficients(A, points, spec, "msdf_box", float(lam), info)


def graph_laplacian(X_all, weight: GraphWeights | KernelSpec) -> LaplacianMatrix:
    """Graph Laplacian with ``f' L f = sum_{i,j} w_ij (f_i - f_j)^2``.

    The double sum runs over ordered pairs, so ``L = 2 (D - W)``.
    """
    if isinstance(weight, KernelSpec):
        weight = GraphWeights(weight)
    X = np.asarray(X_all, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise ValueError("graph Laplacian needs at least 2 points")
    spec = weight.kernel.resolve(X.shape[1])
    W = gram(spec, X).values.copy()
    np.fill_diagonal(W, 0.0)
    k = weight.n_neighbors
    if k is not None:
        if k >= n or k < 1:
            raise ValueError(f"n_neighbors must be in [1, n-1] = [1, {n - 1}], got {k}")
        D2 = cdist(X, X, "sqeuclidean")
        np.fill_diagonal(D2, np.inf)
        order = np.argsort(D2, axis=1, kind="stable")[:, :k]
        mask = np.zeros((n, n), dtype=bool)
        mask[np.arange(n)[:, None], order] = True
        mask |= mask.T
        W = np.where(mask, W, 0.0)
    deg = W.sum(axis=1)
    L = 2.0 * (np.diag(deg) - W)
    return LaplacianMatrix(L, weight, W)


def solve_laprls(K, L, Y, c1: float, c2: float, *, points=None) -> ModelCoefficients:
    """Laplacian-regularised least squares.

    The first ``len(Y)`` expansion points are the labeled ones.  Solves
    ``(J K + (c1/n) L K + c2 I) alpha = J Y_pad``.
    """
    Kv, spec = _gram_parts(K)
    Lv = _mat(L, "L")
    Y = _vec(Y, "Y")
    _check_symmetric(Kv, "K")
    n = Kv.shape[0]
    n_l = Y.size
    if Lv.shape != (n, n) or n_l > n:
        raise ValueError(f"shape mismatch: K {Kv.shape}, L {Lv.shape}, Y {n_l}")
    if c1 < 0 or not c2 > 0:
        raise ValueError("need c1 >= 0 and c2 > 0")
    JK = np.zeros_like(Kv)
    JK[:n_l] = Kv[:n_l]
    rhs = np.zeros(n)
    rhs[:n_l] = Y
    alpha = _dense_solve(JK + (c1 / n) * (Lv @ Kv) + c2 * np.eye(n), rhs, "laprls")
    return ModelCoefficients(alpha, points, spec, "laprls", float(c2), {"c1": float(c1)})


def predict_raw(model: ModelCoefficients, X_new) -> np.ndarray:
    """Unclipped scores ``sum_i alpha_i k(x, p_i)``; use these for ranking."""
    if model.expansion_points is None or model.kernel is None:
        raise ValueError("model has no expansion points/kernel to predict with")
    P = np.asarray(model.expansion_points, dtype=float)
    X = np.asarray(X_new, dtype=float)
    if X.ndim == 1:
        # a 1-D input is a column of scalars for 1-D models, else one point
        X = X[:, None] if P.shape[1] == 1 else X[None, :]
    if X.shape[1] != P.shape[1]:
        raise ValueError(f"dimension mismatch: model d={P.shape[1]}, X_new d={X.shape[1]}")
    return gram(model.kernel, X, P).values @ model.alpha


def predict(model: ModelCoefficients, X_new) -> np.ndarray:
    """Conditional-probability estimates, the raw scores clipped to [0, 1]."""
    return np.clip(predict_raw(model, X_new), 0.0, 1.0)
