"""
Slope recovery when the predictor curves carry white noise
==========================================================

Lagged autocovariances of the observed curves do not see the noise, so
the eigenfunctions of their composition recover the signal space.
"""

import numpy as np

from agmm import DgpSpec, compute_moments, eigen_basis, eigen_raw, gen_example, integrated_squared_error, make_basis
from agmm import agmm_scalar, cls_scalar

# one panel of 800 curves: two AR(1) signal scores plus ten noise scores
gen = gen_example(DgpSpec(example_id=1, n=800, d=2, seed=42))
panel = gen.W
print("curves:", panel.n, "grid points:", panel.grid.size)

# the noise dominates the raw variation
print("signal variance", gen.X_true.W.var(axis=0).mean().round(3), "noise variance", gen.noise.var(axis=0).mean().round(3))

# lagged moments and the eigenvalues of the autocovariance-based operator
moments = compute_moments(panel, L=5)
raw = eigen_raw(moments.K_hat)
print("leading eigenvalues:", np.round(raw.theta[:5], 4))

# estimate with a 10-function cosine basis and the true dimension
dec = eigen_basis(moments.K_hat, make_basis("cosine", 10, panel.grid))
est = agmm_scalar(moments, dec, rank=2)
print("AGMM integrated squared error:", round(integrated_squared_error(est.beta_hat, gen.beta_true), 4))

# covariance-based principal components pick up the noise instead
cls = cls_scalar(panel, rank=2)
print("CLS integrated squared error: ", round(integrated_squared_error(cls.beta_hat, gen.beta_true), 4))
