"""
Choosing the dimension and the basis size
=========================================

The bootstrap test picks the number of nonzero eigenvalues and blockwise
cross-validation picks how many basis functions to use.
"""

from agmm import DgpSpec, compute_moments, eigen_basis, gen_example, integrated_squared_error, make_basis
from agmm import agmm_scalar, select_d_bootstrap, select_J_cv

gen = gen_example(DgpSpec(example_id=2, n=1200, d=4, seed=7))
panel = gen.W

# sequential test of theta_{d+1} = 0 with residual resampling
sel = select_d_bootstrap(panel, B=200, seed=1)
print("selected d:", sel.d_hat, "exceedance counts:", sel.exceedances)

# cross-validated basis size among Fourier bases with at least d functions
J, trace = select_J_cv(panel, sel.d_hat, range(max(5, sel.d_hat), 26, 2), kind="fourier", return_trace=True)
print("selected J:", J)
for size, err in trace.items():
    print(f"  J={size:2d}  cv error {err:.4g}")

moments = compute_moments(panel)
est = agmm_scalar(moments, eigen_basis(moments.K_hat, make_basis("fourier", J, panel.grid)), sel.d_hat)
print("integrated squared error:", round(integrated_squared_error(est.beta_hat, gen.beta_true), 4))
