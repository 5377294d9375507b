"""
Exchanging the x and z gradient profiles
========================================

With the pump along z and the swept field along y, the averaged S_x is
unchanged when the spatial profiles of B_x and B_z are swapped, for any
gradient triple and any B_y.  Swapping y and z instead does change it.
The script checks both on a few random configurations.
"""

import numpy as np

from spinrelax import CellGeometry, GradientField, SerfScenario, SpinParams
from spinrelax.serf import swap_residual

rng = np.random.default_rng(7)
geom = CellGeometry(0.2, mode_truncation=13)
spin = SpinParams(0.2, base_rate=300.0, slow_down=6.0)

print("      g_x        g_y        g_z       B_y     x<->z      y<->z")
for _ in range(6):
    g = rng.uniform(-2e4, 2e4, size=3)
    b_y = rng.uniform(-3e3, 3e3)
    sc = SerfScenario(geom, spin, GradientField(*g), b_y)
    print(f"  {g[0]:9.1f}  {g[1]:9.1f}  {g[2]:9.1f}  {b_y:8.1f}  "
          f"{swap_residual(sc, 'x', 'z'):.1e}  {swap_residual(sc, 'y', 'z'):.1e}")
