"""Autocovariance-based generalized method-of-moments for curve time series.

Functional linear regression with serially dependent predictor curves that
are contaminated by functional white noise. Lagged autocovariances of the
observed curves are immune to the noise, and the slope function is
recovered from their eigenanalysis.

Modules
-------
funcspace   grids, discretized functions, kernels and orthonormal bases
panels      fully and sparsely observed curve panels
simgen      simulation designs
moments     lagged sample moments
spectral    eigenanalysis and tuning-parameter selection
estimators  slope estimators and error metrics
sparseobs   estimation from sparsely sampled curves
harness     Monte Carlo experiments and intraday-return utilities
"""

from .estimators import (
    METHODS,
    RankDeficiencyError,
    SlopeEstimate,
    SurfaceEstimate,
    agmm_functional,
    agmm_scalar,
    als_scalar,
    cgmm_scalar,
    cls_scalar,
    integrated_squared_error,
    mise,
    ridge_agmm,
)
from .funcspace import (
    BasisSet,
    DimensionError,
    DiscretizedFunction,
    Grid,
    IllPosedError,
    KernelSurface,
    apply_kernel,
    compose_kernels,
    hs_norm,
    inner_product,
    make_basis,
    norm,
)
from .moments import InsufficientDataError, MomentSet, compute_moments
from .panels import CurvePanel, SparsePanel
from .simgen import DgpSpec, SparseDgpSpec, gen_example, gen_functional_response, gen_scores, gen_sparse
from .sparseobs import SmootherSpec, select_bandwidths_cv, sparse_agmm
from .spectral import SpectralDecomposition, eigen_basis, eigen_raw, select_d_bootstrap, select_J_cv

__version__ = "0.1.0"
