"""
A single patch on the axis
==========================

One disk of radius r0 at potential v0 on a grounded plate. Its minimizing
voltage has a closed form, so this is the easiest place to see the three
regimes and to check the numerics against exact values.
"""

import numpy as np

from patchvm import Geometry, generate_single_patch, radial_profile, sweep, vm_analytic
from patchvm.analysis import log_grid

geom = Geometry(R=0.15, Rm=0.015)
r0, v0 = 1e-3, 0.1
m = generate_single_patch(geom, r0, v0)

# sweep the separation; every row carries the energy, force and
# integrated-by-parts minimizers plus a regime label
d = log_grid(1e-9, 1e-2, 8)
curve = sweep(m, d)
exact = v0 * np.log1p(r0**2 / (2 * geom.R * d)) / np.log1p(geom.d2 / d)

print(f"{'d [m]':>10} {'regime':>13} {'V_m energy':>12} {'exact':>12} {'V_m force':>12}")
for i in range(0, len(d), 8):
    print(f"{d[i]:10.2e} {curve.regime[i]:>13} {curve.vm_energy[i]:12.6f} {exact[i]:12.6f} {curve.vm_force[i]:12.6f}")

# far away the plate only sees the surface average (r0/Rm)**2 * v0
print("area average:", v0 * (r0 / geom.Rm) ** 2)

# close in, V_m creeps towards v0 only logarithmically; the boundary-term
# form stays finite at separations no quadrature could resolve
prof = radial_profile(m)
for dd in (1e-12, 1e-20, 1e-30):
    print(f"d = {dd:.0e} m: V_m / v0 = {vm_analytic(prof, geom, dd) / v0:.4f}")
