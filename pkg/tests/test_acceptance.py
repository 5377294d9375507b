"""Acceptance criteria, one test and one PASS/FAIL summary line each.

Run with ``pytest tests/test_acceptance.py -v``; the verdicts are printed in
the "acceptance criteria" section at the end of the session.
"""

import time

import numpy as np

from spinrelax import (
    CellGeometry,
    GradientField,
    SerfScenario,
    SpinParams,
    closed_form_second_order_rate,
    divergence_free_config,
    evolve_fid_fd,
    evolve_fid_spectral,
    linewidth_broadening,
    mean_sx,
    perturbation_parameter,
    relaxation,
    relaxation_rate,
    second_order_rate,
    sweep_by,
    symmetry_check_xz,
    upper_bound_rate,
)
from spinrelax.serf import default_by_grid, swap_residual

L0, D0 = 0.2, 0.2
GAMMA0_SET = (1.0, 20.0, 100.0, 200.0, 500.0)
SERF_SPIN = SpinParams(D0, base_rate=300.0, slow_down=6.0)
SERF_GRADIENTS = (2.5e3, 5e3, 1e4, 2e4)
GEOM = CellGeometry(L0, mode_truncation=15, grid_points=48)


def strictly_decreasing(values):
    return bool(np.all(np.diff(values) < 0))


def test_01_closed_form_oracle(verdict):
    geom, spin = CellGeometry(L0, mode_truncation=50), SpinParams(D0)
    start = time.perf_counter()
    rel = [abs(second_order_rate(geom, spin, 1e3, (m, 1, 1)) / closed_form_second_order_rate(geom, spin, 1e3, m) - 1)
           for m in (1, 2, 3)]
    elapsed = time.perf_counter() - start
    worst = max(rel)
    verdict("criterion 1 (closed forms, M=50)", worst <= 1e-6 and elapsed < 1.0,
            f"max rel diff {worst:.2e} (tol 1e-6), {elapsed * 1e3:.1f} ms")


def test_02_perturbation_parameter(verdict):
    p = perturbation_parameter(CellGeometry(L0), SpinParams(D0), 1e3)
    verdict("criterion 2 (validity parameter = 0.24)", abs(p - 0.24) <= 1e-3,
            f"parameter {p:.6f}, |p - 0.24| = {abs(p - 0.24):.2e} (tol 1e-3)")


def test_03_phase_rate(verdict):
    worst = 0.0
    for gg in (100.0, 500.0, 950.0):
        assert perturbation_parameter(GEOM, SpinParams(D0), gg) <= 0.24
        for g0 in (1.0, 20.0, 200.0):
            res = relaxation_rate(GEOM, SpinParams(D0, base_rate=g0), gg)
            expected = gg * L0 / 2
            worst = max(worst, abs(res.phase_rate / expected - 1))
    verdict("criterion 3 (phase rate = gamma g L / 2)", worst <= 5e-3,
            f"max rel deviation {worst:.2e} (tol 5e-3)")


def test_04_upper_bound(verdict):
    margin = np.inf
    for gg in (100.0, 250.0, 500.0, 1000.0, 2000.0):
        for g0 in GAMMA0_SET:
            spin = SpinParams(D0, base_rate=g0)
            excess = relaxation(GEOM, spin, gg).delta_gamma2
            bound = upper_bound_rate(GEOM, spin, gg)
            margin = min(margin, bound - excess)
    verdict("criterion 4 (Delta Gamma2 <= lowest-mode rate)", margin >= 0,
            f"min(bound - Delta Gamma2) = {margin:.4g} s^-1 over 25 points")


def test_05_gamma0_ordering(verdict):
    excess = [relaxation(GEOM, SpinParams(D0, base_rate=g0), 1e3).delta_gamma2 for g0 in GAMMA0_SET]
    fid_ok = strictly_decreasing(excess)
    serf_ok = True
    pairs = []
    for direction in range(3):
        for g in SERF_GRADIENTS:
            comps = [0.0, 0.0, 0.0]
            comps[direction] = g
            dw = [linewidth_broadening(SerfScenario(GEOM, SERF_SPIN.replace(base_rate=g0), GradientField(*comps)))
                  for g0 in (300.0, 3000.0)]
            pairs.append(dw)
            serf_ok &= dw[0] > dw[1]
    verdict("criterion 5 (ordering in Gamma0)", fid_ok and serf_ok,
            f"Delta Gamma2 = {np.round(excess, 4).tolist()}; SERF Delta w(300) > Delta w(3000) at "
            f"{sum(a > b for a, b in pairs)}/{len(pairs)} gradients")


def test_06_length_sweep(verdict):
    lengths = np.linspace(0.1, 0.8, 15)
    spin = SpinParams(D0, base_rate=20.0)
    with_g = [relaxation_rate(CellGeometry(L, mode_truncation=15), spin, 1e3).gamma2 for L in lengths]
    without = [relaxation_rate(CellGeometry(L, mode_truncation=15), spin, 0.0).gamma2 for L in lengths]
    k = int(np.argmin(with_g))
    interior = 0 < k < len(lengths) - 1
    verdict("criterion 6 (L-sweep shape)", interior and strictly_decreasing(without),
            f"minimum of Gamma2(L) at L = {lengths[k]:.3f} cm (index {k}/{len(lengths) - 1}); "
            f"g = 0 strictly decreasing: {strictly_decreasing(without)}")


def test_07_diffusion_sweep(verdict):
    geom = CellGeometry(0.4, mode_truncation=15)
    diffusions = np.geomspace(0.05, 1.0, 12)
    bad = []
    for g0 in GAMMA0_SET:
        excess = [relaxation(geom, SpinParams(D, base_rate=g0), 1e3).delta_gamma2 for D in diffusions]
        if not strictly_decreasing(excess):
            bad.append(g0)
    verdict("criterion 7 (motional narrowing in D)", not bad,
            f"Delta Gamma2(D) strictly decreasing on 12 points in [0.05, 1] for "
            f"{len(GAMMA0_SET) - len(bad)}/{len(GAMMA0_SET)} Gamma0 values")


def test_08_cross_solver(verdict):
    worst_fid = 0.0
    for g0 in (20.0, 200.0):
        spin = SpinParams(D0, base_rate=g0)
        t_end = 2.0 / relaxation_rate(GEOM, spin, 1e3).gamma2
        a = evolve_fid_spectral(GEOM, spin, 1e3, t_end, 400)
        b = evolve_fid_fd(GEOM, spin, 1e3, t_end, 400)
        worst_fid = max(worst_fid, float(np.max(np.abs(b.modulus / a.modulus - 1))))
    worst_serf = 0.0
    for grad in ((1e4, 0.0, 0.0), (0.0, 1e4, 0.0), (5e3, 5e3, -1e4)):
        for b_y in (300.0, 1300.0, 4000.0):
            sc = SerfScenario(GEOM, SERF_SPIN, GradientField(*grad), b_y)
            s = mean_sx(sc, method="spectral")
            f = mean_sx(sc, method="fd")
            worst_serf = max(worst_serf, abs(f / s - 1))
    verdict("criterion 8 (spectral vs finite difference)", worst_fid <= 1e-2 and worst_serf <= 5e-3,
            f"FID modulus max rel diff {worst_fid:.2e} (tol 1e-2); S_x max rel diff {worst_serf:.2e} (tol 5e-3)")


def test_09_xz_symmetry(verdict):
    worst, control = 0.0, np.inf
    for g in SERF_GRADIENTS:
        for grad in ((g, 0.0, 0.0), (g, 0.4 * g, -0.3 * g), (-0.5 * g, 0.5 * g, g)):
            for b_y in (-2000.0, 150.0, 900.0, 3500.0):
                sc = SerfScenario(GEOM, SERF_SPIN, GradientField(*grad), b_y)
                worst = max(worst, symmetry_check_xz(sc))
        sc = SerfScenario(GEOM, SERF_SPIN, GradientField(0.0, g, 0.0), 900.0)
        control = min(control, swap_residual(sc, "y", "z"))
    verdict("criterion 9 (x <-> z swap symmetry)", worst <= 1e-8 and control > 1e-4,
            f"max x<->z residual {worst:.2e} (tol 1e-8); min y<->z control residual {control:.2e} (> 1e-4)")


def test_10_single_axis_linewidths(verdict):
    base = SerfScenario(GEOM, SERF_SPIN)
    grid = default_by_grid(base)
    w0 = sweep_by(base, grid).w
    worst_xz, y_wins = 0.0, 0
    for g in SERF_GRADIENTS:
        wx = sweep_by(base.with_gradient(GradientField(g, 0.0, 0.0)), grid).w
        wy = sweep_by(base.with_gradient(GradientField(0.0, g, 0.0)), grid).w
        wz = sweep_by(base.with_gradient(GradientField(0.0, 0.0, g)), grid).w
        worst_xz = max(worst_xz, abs(wx / wz - 1))
        y_wins += (wy - w0) > (wx - w0)
    verdict("criterion 10 (single-axis linewidths)", worst_xz <= 1e-3 and y_wins == len(SERF_GRADIENTS),
            f"max |w_x / w_z - 1| = {worst_xz:.2e} (tol 1e-3); Delta w_y > Delta w_x at "
            f"{y_wins}/{len(SERF_GRADIENTS)} gradients")


def test_11_case_ordering(verdict):
    base = SerfScenario(GEOM, SERF_SPIN)
    grid = default_by_grid(base)
    ok, n = 0, 0
    for g_z in (-2e4, -1e4, -5e3, 5e3, 1e4, 2e4):
        w = [sweep_by(base.with_gradient(divergence_free_config(c, g_z)), grid).w for c in (1, 2, 3)]
        n += 1
        ok += w[2] >= w[1] >= w[0]
    verdict("criterion 11 (divergence-free case ordering)", ok == n,
            f"w(case 3) >= w(case 2) >= w(case 1) at {ok}/{n} values of g_z")


def test_12_degenerate_checks(verdict):
    spin = SpinParams(D0, base_rate=20.0)
    excess_fid = relaxation(GEOM, spin, 0.0).delta_gamma2
    zero_serf = SerfScenario(GEOM, SERF_SPIN, divergence_free_config(2, 0.0))
    excess_serf = linewidth_broadening(zero_serf)
    a = evolve_fid_spectral(GEOM, spin, 1e3, 0.02, 200)
    b = evolve_fid_spectral(GEOM, spin.replace(pump_rate=123.0), 1e3, 0.02, 200)
    fid_diff = float(np.max(np.abs(a.values - b.values)))
    sc = SerfScenario(GEOM, SERF_SPIN, GradientField(1e4, 2e3, 0.0))
    w1 = sweep_by(sc).w
    w2 = sweep_by(SerfScenario(GEOM, SERF_SPIN.replace(pump_rate=123.0), sc.gradient)).w
    w_diff = abs(w2 / w1 - 1)
    ok = abs(excess_fid) <= 1e-9 and abs(excess_serf) <= 1e-9 and fid_diff <= 1e-12 and w_diff <= 1e-12
    verdict("criterion 12 (degenerate limits)", ok,
            f"Delta Gamma2(g=0) = {excess_fid:.1e}, Delta w(g=0) = {excess_serf:.1e}; "
            f"R-scaling: FID {fid_diff:.1e}, w {w_diff:.1e} (tol 1e-12)")
