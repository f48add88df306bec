"""
Minimizing the force or the energy
==================================

Experiments null either the force or the energy. Both minimizers are
weighted means of the same ring profile with slightly different kernels;
over an ensemble their difference is statistically zero.
"""

import numpy as np

from patchvm import Geometry
from patchvm.analysis import ensemble_vm, log_grid

geom = Geometry(R=0.15, Rm=0.015)
res = ensemble_vm(geom, 5e-4, 0.1, n_real=60, d_grid=log_grid(1e-7, 1e-2), master_seed=11, threads=4)

# per-separation spread and paired difference
for i in range(0, len(res.d), 6):
    print(f"d = {res.d[i]:.1e} m  std V_m = {res.energy_std[i]:.4f} V  "
          f"force - energy = {res.diff_mean[i]:+.1e} +/- {res.diff_stderr[i]:.1e} V")

mean, se = res.window_paired()
print(f"paired difference over the fit window: {mean:+.2e} +/- {se:.2e} V")

b = res.b_values
b = b[np.isfinite(b)]
print(f"fitted b over realizations: mean {b.mean():+.2e}, std {b.std(ddof=1):.2e} V per e-fold")
