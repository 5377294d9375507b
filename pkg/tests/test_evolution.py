"""Time-domain FID solvers and T2 extraction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scipy.optimize import brentq

from spinrelax import (
    CellGeometry,
    FidTrace,
    SpinParams,
    core,
    evolve_fid_fd,
    evolve_fid_spectral,
    extract_t2,
    relaxation,
    relaxation_rate,
    steady_state_longitudinal,
    upper_bound_rate,
)
from spinrelax import fdgrid
from spinrelax.errors import InsufficientHorizonError


def test_zero_gradient_is_multi_exponential():
    geom = CellGeometry(0.2, mode_truncation=9)
    spin = SpinParams(0.2, base_rate=20.0)
    t = np.linspace(0, 0.02, 41)
    trace = evolve_fid_spectral(geom, spin, 0.0, 0.02, 40)
    # independent sum over odd modes: C u^3 exp(-Gamma t)
    m = np.arange(1, 10, 2)
    mm, nn, ll = np.meshgrid(m, m, m, indexing="ij")
    rate = 20.0 + 0.2 * (np.pi / 0.2) ** 2 * (mm ** 2 + nn ** 2 + ll ** 2)
    amp = 1.0 / ((mm * nn * ll) ** 2 * rate)
    ref = np.array([(amp * np.exp(-rate * s)).sum() for s in t])
    np.testing.assert_allclose(trace.values, ref / ref[0], rtol=1e-12, atol=1e-15)


def test_single_mode_fd_decay_rate():
    geom = CellGeometry(0.2, grid_points=32)
    spin = SpinParams(0.2, base_rate=20.0)
    L = geom.L

    def mode(x, y, z):
        return np.sin(np.pi * x / L) * np.sin(np.pi * y / L) * np.sin(np.pi * z / L)

    rate = core.mode_decay_rate(geom, spin, (1, 1, 1))
    trace = evolve_fid_fd(geom, spin, 0.0, 2.0 / rate, 400, initial=mode)
    fitted = -np.polyfit(trace.times, np.log(trace.modulus), 1)[0]
    assert fitted == pytest.approx(rate, rel=5e-3)


def test_fd_eig_and_thomas_agree():
    geom = CellGeometry(0.2, grid_points=12)
    spin = SpinParams(0.2, base_rate=20.0)
    a = evolve_fid_fd(geom, spin, 1e3, 0.01, 50, method="eig")
    b = evolve_fid_fd(geom, spin, 1e3, 0.01, 50, method="thomas")
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_offset_subtraction_only_changes_phase():
    geom = CellGeometry(0.2, mode_truncation=11)
    spin = SpinParams(0.2, base_rate=20.0)
    a = evolve_fid_spectral(geom, spin, 1e3, 0.01, 100)
    b = evolve_fid_spectral(geom, spin, 1e3, 0.01, 100, subtract_offset=True)
    np.testing.assert_allclose(a.modulus, b.modulus, rtol=1e-10)
    np.testing.assert_allclose(a.values, b.values * np.exp(-1j * 100.0 * a.times), atol=1e-10)


def test_t2_of_pure_exponential():
    t = np.linspace(0, 1, 2001)
    trace = FidTrace(t, np.exp(-(7.3 + 40j) * t))
    res = extract_t2(trace)
    assert res.gamma2 == pytest.approx(7.3, rel=1e-9)
    assert res.phase_rate == pytest.approx(40.0, rel=1e-9)


def test_t2_requires_crossing():
    t = np.linspace(0, 0.1, 11)
    with pytest.raises(InsufficientHorizonError):
        extract_t2(FidTrace(t, np.exp(-t)))


def test_trace_validation():
    with pytest.raises(ValueError):
        FidTrace(np.array([0.0, 0.2, 0.1]), np.ones(3))
    with pytest.raises(ValueError):
        evolve_fid_spectral(CellGeometry(0.2), SpinParams(0.2), 0.0, -1.0)


def test_weak_gradient_rate_bracketed():
    # higher diffusion modes only speed up the early decay
    geom = CellGeometry(0.2, mode_truncation=7)
    res = relaxation(geom, SpinParams(0.2), 100.0, n_steps=400)
    slowest = core.mode_decay_rate(geom, SpinParams(0.2), (1, 1, 1))
    assert slowest < res.gamma2 < 1.2 * slowest
    assert res.phase_rate == pytest.approx(10.0, rel=1e-6)
    assert 0 <= res.delta_gamma2 <= upper_bound_rate(geom, SpinParams(0.2), 100.0)


def test_zero_gradient_excess_is_exactly_zero():
    geom = CellGeometry(0.2, mode_truncation=7)
    assert relaxation(geom, SpinParams(0.2, base_rate=20.0), 0.0, n_steps=200).delta_gamma2 == 0.0


@settings(max_examples=15, deadline=None)
@given(R=st.floats(1e-3, 1e3), gg=st.floats(0.0, 1.5e3))
def test_normalized_fid_independent_of_pump(R, gg):
    geom = CellGeometry(0.2, mode_truncation=7)
    a = evolve_fid_spectral(geom, SpinParams(0.2, base_rate=20.0), gg, 0.01, 20)
    b = evolve_fid_spectral(geom, SpinParams(0.2, base_rate=20.0, pump_rate=R), gg, 0.01, 20)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(gg=st.floats(10.0, 1.5e3))
def test_modulus_bounded_and_sign_symmetric(gg):
    geom = CellGeometry(0.2, mode_truncation=7)
    spin = SpinParams(0.2, base_rate=20.0)
    a = evolve_fid_spectral(geom, spin, gg, 0.01, 20, subtract_offset=True)
    b = evolve_fid_spectral(geom, spin, -gg, 0.01, 20, subtract_offset=True)
    assert np.all(a.modulus <= 1 + 1e-12)
    np.testing.assert_allclose(a.modulus, b.modulus, rtol=1e-10)


def test_steady_state_profile():
    geom = CellGeometry(0.2, mode_truncation=15)
    spin = SpinParams(0.2, base_rate=20.0, pump_rate=2.0)
    vec = steady_state_longitudinal(geom, spin)
    x = np.linspace(0, 0.2, 9)
    field = vec.evaluate(x[:, None, None], x[None, :, None], x[None, None, :])
    assert np.all(field > -1e-12)
    np.testing.assert_allclose(field[0], 0.0, atol=1e-15)
    np.testing.assert_allclose(field[:, :, -1], 0.0, atol=1e-15)
    zero = steady_state_longitudinal(geom, spin.replace(pump_rate=0.0))
    assert np.all(zero.tensor() == 0)


def test_center_value_when_bulk_relaxation_dominates():
    # a thin wall layer leaves the centre at R / Gamma0; the sine series needs many modes to see it
    spin = SpinParams(0.2, base_rate=1e4, pump_rate=2.0)
    fd = fdgrid.steady_state_scalar(CellGeometry(0.2, grid_points=63), spin.D, spin.gamma0, spin.R)
    spectral = steady_state_longitudinal(CellGeometry(0.2, mode_truncation=127), spin)
    assert fd[31, 31, 31] == pytest.approx(2.0 / 1e4, rel=1e-6)
    assert spectral.evaluate(0.1, 0.1, 0.1) == pytest.approx(fd[31, 31, 31], rel=5e-4)


def test_zero_gradient_t2_against_root_find():
    k2 = (np.pi / 0.2) ** 2
    m = np.arange(1, 122, 2)
    mm, nn, ll = np.meshgrid(m, m, m, indexing="ij")
    rate = 20.0 + 0.2 * k2 * (mm ** 2 + nn ** 2 + ll ** 2)
    amp = 1.0 / ((mm * nn * ll) ** 2 * rate)
    T2 = brentq(lambda t: (amp * np.exp(-rate * t)).sum() / amp.sum() - np.exp(-1), 1e-6, 1.0, xtol=1e-16)
    res = relaxation_rate(CellGeometry(0.2, mode_truncation=31), SpinParams(0.2, base_rate=20.0), 0.0)
    assert res.gamma2 == pytest.approx(1 / T2, rel=2e-4)
    # bracketed by the slowest mode and the weight-averaged rate
    assert 168.04 < res.gamma2 < (amp * rate).sum() / amp.sum()


def test_fd_phase_matches_spectral():
    geom = CellGeometry(0.2, mode_truncation=15, grid_points=48)
    spin = SpinParams(0.2, base_rate=20.0)
    a = evolve_fid_spectral(geom, spin, 1e3, 0.01, 200)
    b = evolve_fid_fd(geom, spin, 1e3, 0.01, 200)
    dphase = np.degrees(np.abs(np.angle(b.values / a.values)))
    assert dphase.max() < 2.0
    np.testing.assert_allclose(b.modulus, a.modulus, rtol=1e-2)


@settings(max_examples=10, deadline=None)
@given(gg=st.floats(0.0, 2e3), g0=st.sampled_from([1.0, 20.0, 200.0]))
def test_rate_bounds(gg, g0):
    geom = CellGeometry(0.2, mode_truncation=9)
    spin = SpinParams(0.2, base_rate=g0)
    res = relaxation(geom, spin, gg, n_steps=400)
    assert res.gamma2 >= g0 - 1e-9
    assert res.delta_gamma2 >= -1e-9
    trace = evolve_fid_spectral(geom, spin, gg, 1e-3, 10)
    assert trace.modulus[1] <= trace.modulus[0]
