"""
Kernel families and Gram matrices.

Every kernel in the package is described by a :class:`KernelSpec` and
materialised with :func:`gram`.  Five families are available:

========== ==============================================================
family      k(x, y)
========== ==============================================================
gaussian    exp(-sigma * ||x - y||^2)
laplacian   exp(-sigma * ||x - y||)
bessel      [Gamma(mu + 1) * (2 / (sigma r))^mu * J_mu(sigma r)]^n,
            mu = order + 1, n = bessel_exponent, r = ||x - y||
anova       (sum_h exp(-sigma * (x_h - y_h)^2))^degree
indicator   prod_h I(x_h - y_h),  I(z) = 1 for z >= 0
========== ==============================================================

The Bessel kernel is normalised so that k(x, x) = 1; its value at r = 0 is
the limit of the power series of J_mu(z) / z^mu.  The ANOVA kernel uses the
sum-of-one-dimensional-Gaussians form raised to the degree.

``sigma`` may be given as an expression in the input dimension ``d`` (for
example ``"d"``, ``"1/d"`` or ``"0.5*d"``); call :meth:`KernelSpec.resolve`
with the dimension before evaluating.

Examples
--------
>>> import numpy as np
>>> spec = KernelSpec("laplacian", sigma=1.0)
>>> round(eval_kernel(spec, np.array([0.0]), np.array([1.0])), 6)
0.367879
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln, jv

__all__ = [
    "FAMILIES",
    "MSDF_FAMILIES",
    "KernelSpec",
    "GramMatrix",
    "eval_kernel",
    "gram",
    "point_set_id",
    "resolve_sigma",
]

FAMILIES = ("gaussian", "laplacian", "bessel", "anova", "indicator")

# M1..M4 of the MSDF kernel catalogue, in order.
MSDF_FAMILIES = ("gaussian", "laplacian", "bessel", "anova")

_ALIASES = {
    "gaussianrbf": "gaussian",
    "rbf": "gaussian",
    "gauss": "gaussian",
    "laplace": "laplacian",
    "anovarbf": "anova",
    "indicatorstep": "indicator",
    "step": "indicator",
    "m1": "gaussian",
    "m2": "laplacian",
    "m3": "bessel",
    "m4": "anova",
}

_SIGMA_EXPR = re.compile(
    r"^\s*(?:(?P<num>[0-9.eE+-]+)\s*(?P<op>[*/])\s*)?d\s*$|^\s*(?P<inv>[0-9.eE+-]+)\s*/\s*d\s*$"
)

# below this value of sigma*r the Bessel ratio is evaluated by its series
_BESSEL_SERIES_CUTOFF = 0.05


def _parse_sigma(expr: str, d: int) -> float:
    m = _SIGMA_EXPR.match(expr)
    if m is None:
        raise ValueError(f"cannot parse sigma expression {expr!r}; use e.g. 'd', '2*d', '1/d'")
    if m.group("inv") is not None:
        return float(m.group("inv")) / d
    if m.group("num") is None:
        return float(d)
    num = float(m.group("num"))
    return num * d if m.group("op") == "*" else num / d


def resolve_sigma(value: float | str, d: int) -> float:
    """Numeric value of a width that may be an expression in ``d``."""
    if isinstance(value, str):
        return _parse_sigma(value, d)
    return float(value)


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description.

    Parameters
    ----------
    family : str
        One of ``gaussian``, ``laplacian``, ``bessel``, ``anova``,
        ``indicator`` (aliases such as ``rbf`` or ``M3`` are accepted).
    sigma : float or str
        Width/scale parameter.  A string is an expression in the input
        dimension ``d`` and must be resolved before use.
    degree : int
        ANOVA degree.
    order : int
        Bessel order nu; the kernel uses J of order nu + 1.
    bessel_exponent : int
        Power n applied to the normalised Bessel ratio.
    """

    family: str
    sigma: float | str = 1.0
    degree: int = 2
    order: int = 1
    bessel_exponent: int = 1

    def __post_init__(self):
        fam = str(self.family).lower().replace("_", "").replace("-", "")
        fam = _ALIASES.get(fam, fam)
        if fam not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if isinstance(self.sigma, str):
            _parse_sigma(self.sigma, 1)
        else:
            s = float(self.sigma)
            if not (s > 0 and math.isfinite(s)):
                raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
            object.__setattr__(self, "sigma", s)
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"degree must be an integer >= 1, got {self.degree}")
        if int(self.order) != self.order or self.order < 0:
            raise ValueError(f"order must be an integer >= 0, got {self.order}")
        if int(self.bessel_exponent) != self.bessel_exponent or self.bessel_exponent < 1:
            raise ValueError(f"bessel_exponent must be an integer >= 1, got {self.bessel_exponent}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "bessel_exponent", int(self.bessel_exponent))

    @property
    def is_resolved(self) -> bool:
        return not isinstance(self.sigma, str)

    @property
    def symmetric(self) -> bool:
        return self.family != "indicator"

    def resolve(self, d: int) -> KernelSpec:
        """Return a copy with a numeric sigma for input dimension ``d``."""
        if self.is_resolved:
            return self
        return replace(self, sigma=_parse_sigma(self.sigma, d))

    @property
    def label(self) -> str:
        """Short stable identifier, e.g. ``M1(sigma=9)``."""
        tag = {
            "gaussian": "M1",
            "laplacian": "M2",
            "bessel": "M3",
            "anova": "M4",
            "indicator": "I",
        }[self.family]
        s = self.sigma if isinstance(self.sigma, str) else f"{self.sigma:.6g}"
        extra = ""
        if self.family == "anova":
            extra = f",D={self.degree}"
        elif self.family == "bessel":
            extra = f",nu={self.order},n={self.bessel_exponent}"
        if self.family == "indicator":
            return tag
        return f"{tag}(sigma={s}{extra})"

    @property
    def msdf_index(self) -> int:
        """1-based position in the MSDF catalogue (M1..M4)."""
        return MSDF_FAMILIES.index(self.family) + 1

    def to_dict(self) -> dict:
        out = {"family": self.family, "sigma": self.sigma}
        if self.family == "anova":
            out["degree"] = self.degree
        if self.family == "bessel":
            out["order"] = self.order
            out["bessel_exponent"] = self.bessel_exponent
        return out

    @classmethod
    def from_dict(cls, d: dict) -> KernelSpec:
        return cls(**d)


def point_set_id(X) -> str:
    """Content hash used as the provenance identifier of a point set."""
    X = np.ascontiguousarray(X, dtype=float)
    h = hashlib.sha1(repr(X.shape).encode())
    h.update(X.tobytes())
    return h.hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Kernel matrix between two point sets, with provenance."""

    values: np.ndarray
    row_points: str
    col_points: str
    spec: KernelSpec = field(repr=True)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape

    @property
    def T(self) -> GramMatrix:
        return GramMatrix(self.values.T, self.col_points, self.row_points, self.spec)


def _as_points(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array of points")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if X.shape[1] == 0:
        raise ValueError(f"{name} has zero dimension")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return X


def _bessel_ratio(z: np.ndarray, mu: int) -> np.ndarray:
    """Gamma(mu+1) (2/z)^mu J_mu(z), equal to 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < _BESSEL_SERIES_CUTOFF
    if np.any(small):
        # sum_m (-1)^m (z/2)^{2m} Gamma(mu+1) / (m! Gamma(m+mu+1)); 8 terms is
        # far beyond double precision for z < 0.05
        q = (z[small] / 2.0) ** 2
        term = np.ones_like(q)
        acc = np.ones_like(q)
        for m in range(1, 8):
            term = -term * q / (m * (m + mu))
            acc = acc + term
        out[small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        logscale = gammaln(mu + 1) + mu * (math.log(2.0) - np.log(zb))
        out[big] = np.exp(logscale) * jv(mu, zb)
    return out


def _from_sq_dists(spec: KernelSpec, D2: np.ndarray) -> np.ndarray:
    fam = spec.family
    s = spec.sigma
    if fam == "gaussian":
        return np.exp(-s * D2)
    if fam == "laplacian":
        return np.exp(-s * np.sqrt(D2))
    if fam == "bessel":
        K = _bessel_ratio(s * np.sqrt(D2), spec.order + 1)
        return K ** spec.bessel_exponent
    raise AssertionError(fam)


def gram(spec: KernelSpec, rows, cols=None, *, row_id: str | None = None,
         col_id: str | None = None) -> GramMatrix:
    """Gram matrix ``values[i, j] = k(rows[i], cols[j])``.

    ``cols`` defaults to ``rows``.  Pairwise differences are formed
    elementwise (never through the ``|x|^2 + |y|^2 - 2 x.y`` expansion) so
    ``gram(spec, X, X)`` is exactly symmetric for the symmetric families.
    """
    if not spec.is_resolved:
        raise ValueError(f"kernel sigma {spec.sigma!r} is symbolic; call spec.resolve(d) first")
    A = _as_points(rows, "rows")
    same = cols is None
    B = A if same else _as_points(cols, "cols")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    row_id = row_id or point_set_id(A)
    col_id = row_id if same and col_id is None else (col_id or point_set_id(B))

    fam = spec.family
    if fam in ("gaussian", "laplacian", "bessel"):
        D2 = cdist(A, B, "sqeuclidean")
        K = _from_sq_dists(spec, D2)
    elif fam == "anova":
        K = np.zeros((A.shape[0], B.shape[0]))
        for h in range(A.shape[1]):
            diff = A[:, h, None] - B[None, :, h]
            K += np.exp(-spec.sigma * diff * diff)
        K = K ** spec.degree
    else:  # indicator
        K = np.ones((A.shape[0], B.shape[0]))
        for h in range(A.shape[1]):
            K *= A[:, h, None] >= B[None, :, h]
    return GramMatrix(K, row_id, col_id, spec)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Kernel value k(x, y) for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(gram(spec, x[None, :], y[None, :], row_id="x", col_id="y").values[0, 0])
