"""
Linewidth of a zero-field magnetometer in field gradients
=========================================================

The steady-state Bloch equation is solved for each transverse field B_y;
the dispersive S_x(B_y) has a maximum and a minimum whose half separation
is the linewidth w.  Gradients broaden the line.  A gradient along y,
the axis of the swept field, broadens it much more than the same
gradient along x or z, which act identically.

Fields and gradients are given as precession rates (gyro = 1).
"""

from spinrelax import (
    CellGeometry,
    GradientField,
    SerfScenario,
    SpinParams,
    divergence_free_config,
    sweep_by,
)
from spinrelax.serf import default_by_grid

geom = CellGeometry(0.2, mode_truncation=15)
spin = SpinParams(0.2, base_rate=300.0, slow_down=6.0)
base = SerfScenario(geom, spin)
grid = default_by_grid(base)
w0 = sweep_by(base, grid).w
print(f"gradient-free linewidth w0 = {w0:.2f} s^-1")

print("\nbroadening Delta w for a single gradient component")
print("    g      x         y         z")
for g in (5e3, 1e4, 2e4):
    row = []
    for axis in range(3):
        comps = [0.0, 0.0, 0.0]
        comps[axis] = g
        row.append(sweep_by(base.with_gradient(GradientField(*comps)), grid).w - w0)
    print(f"  {g:6g}  " + "  ".join(f"{v:8.3f}" for v in row))

print("\ndivergence-free combinations at g_z = 2e4")
for case, label in ((1, "g_x = -g_z"), (2, "g_x = g_y = -g_z/2"), (3, "g_y = -g_z")):
    w = sweep_by(base.with_gradient(divergence_free_config(case, 2e4)), grid).w
    print(f"  case {case} ({label:>18}):  w = {w:.2f}")
