"""
Predicting the close from the morning path
==========================================

Minute prices become cumulative intraday return curves. The curve up to a
cut-off minute predicts the closing return; rolling one-step errors are
compared with the historical mean. The prices here are simulated.
"""

import numpy as np

from agmm.harness import CidrPanel, cidr_transform, rolling_mspe

rng = np.random.default_rng(5)
days, minutes = 160, 60

# a persistent daily drift component makes the afternoon partly predictable
drift = np.zeros(days)
for t in range(1, days):
    drift[t] = 0.6 * drift[t - 1] + rng.normal(0, 0.02)
steps = drift[:, None] / minutes + rng.normal(0, 0.001, (days, minutes))
prices = 100 * np.exp(np.cumsum(steps, axis=1))

panel = cidr_transform(CidrPanel(prices))
print("days:", panel.n, "minutes:", panel.grid.size)

result = rolling_mspe(panel, ("AGMM", "CLS", "Mean"), H=20, T_cut=45, d_grid=(1, 2, 3), J_grid=(5, 9))
for method, row in result.items():
    print(f"{method:5s} mspe={row['mspe']:.4f} d={row['d']} J={row['J']}")
