"""Conditional-probability estimation by Fredholm integral equations of the first kind."""

from .data import DataSplit, Dataset, Normalizer, apply_normalizer, fit_normalizer, load_csv, split
from .evaluation import CVResult, ExperimentConfig, accuracy, auc, grid_search, kfold_cv
from .kernels import GramMatrix, KernelSpec, eval_kernel, gram
from .solvers import (
    LaplacianMatrix,
    ModelCoefficients,
    graph_laplacian,
    predict,
    predict_raw,
    solve_fredholm,
    solve_krls,
    solve_laprls,
    solve_msdf,
    solve_msdf_box,
    solve_vrisk,
)
from .vmatrix import (
    VMatrix,
    VMatrixSpec,
    cdf_indicator_v,
    identity_v,
    semi_gaussian_v,
    semi_indicator_v,
    uniform_indicator_v,
)

__version__ = "0.1.0"
