"""
A curve-valued response
=======================

The same eigenanalysis gives the kernel of an operator between curves.
"""

import numpy as np

from agmm import DgpSpec, DiscretizedFunction, KernelSurface, agmm_functional, compute_moments, eigen_raw
from agmm import gen_example, gen_functional_response, hs_norm

gen = gen_example(DgpSpec(example_id=1, n=1000, d=2, seed=8))
g = gen.grid
phi = [DiscretizedFunction(g, row) for row in gen.phi]

# true kernel: gamma(u, v) = phi_1(u) phi_1(v) - 0.5 phi_2(u) phi_1(v); u is the response point
gamma = KernelSurface.outer(phi[0], phi[0]) - KernelSurface.outer(phi[1], phi[0]) * 0.5
panel = gen_functional_response(gen, gamma, noise_sd=0.5, seed=9)

moments = compute_moments(panel)
est = agmm_functional(moments, eigen_raw(moments.K_hat), rank=2)
err = hs_norm(est.gamma_hat - gamma)
print("relative Hilbert-Schmidt error:", round(err / hs_norm(gamma), 3))
print("estimate at (0.25, 0.25):", np.round(est.gamma_hat.values[25, 25], 3))
