"""
Free-induction decay of the transverse polarization P+ = P_x + i P_y.

    dP+/dt = D lap(P+) - i gamma B_z(r) P+ - Gamma0 P+,   P+ = 0 on the walls,

with B_z = g x and the initial profile given by the pumped steady state
D lap(P) - Gamma0 P + R = 0.  Two independent discretizations are provided:

* ``evolve_fid_spectral``: Galerkin projection on the sine eigenmodes.  The
  generator is a Kronecker sum, so the propagator factorizes into a dense
  M x M matrix exponential along x and pure decays along y and z.
* ``evolve_fid_fd``: Crank-Nicolson in time, 3-point differences in space.

Both return the volume-averaged signal normalized to 1 at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import expm
from scipy.optimize import brentq

from . import fdgrid
from .core import (
    CellGeometry,
    ScalarModeVector,
    SpinParams,
    check_diffusion_validity,
    initial_coefficient_cube,
    mode_decay_rate,
    position_matrix,
    uniform_overlap,
)
from .errors import DegenerateParametersError, InsufficientHorizonError, SolverError

#: initial horizon in units of the slowest mode lifetime, and the doubling cap
HORIZON_START = 5.0
HORIZON_CAP = 64.0
DEFAULT_STEPS = 2000
TRUNCATION_TOL = 1e-6


@dataclass(frozen=True)
class FidTrace:
    """Normalized volume-averaged transverse polarization."""

    times: np.ndarray
    values: np.ndarray
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.size == 0 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D arrays of equal, nonzero length")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        return np.unwrap(np.angle(self.values))


@dataclass(frozen=True)
class RelaxationResult:
    T2: float
    gamma2: float
    delta_gamma2: float = math.nan
    phase_rate: float = math.nan


# ---------------------------------------------------------------------------
# initial condition
# ---------------------------------------------------------------------------

def steady_state_longitudinal(geom: CellGeometry, spin: SpinParams) -> ScalarModeVector:
    """Mode coefficients of the pumped steady state (the FID initial profile)."""
    return ScalarModeVector(initial_coefficient_cube(geom, spin).ravel(), geom)


def _time_grid(t_end: float, n_steps: int) -> np.ndarray:
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if int(n_steps) < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    return np.linspace(0.0, t_end, int(n_steps) + 1)


# ---------------------------------------------------------------------------
# spectral solver
# ---------------------------------------------------------------------------

def _x_generator(geom: CellGeometry, spin: SpinParams, g: float, subtract_offset: bool) -> np.ndarray:
    M, L = geom.M, geom.L
    k2 = geom.wavenumber ** 2
    field_matrix = position_matrix(M, L)
    if subtract_offset:
        field_matrix = field_matrix - (L / 2) * np.eye(M)
    m2 = np.arange(1, M + 1) ** 2
    return -spin.D * k2 * np.diag(m2).astype(complex) - 1j * spin.gyro * g * field_matrix


def truncation_leak(geom: CellGeometry, spin: SpinParams, g: float, coeffs: np.ndarray) -> float:
    """Relative coupling from the populated x-profile into modes beyond M.

    ||gamma g X[M:2M, :M] c|| / ||A_x c||, where c is the x-marginal of the
    initial coefficients weighted by the uniform overlap on y and z.
    """
    if g == 0:
        return 0.0
    M, L = geom.M, geom.L
    u = uniform_overlap(M, L)
    c = np.einsum("mnl,n,l->m", coeffs, u, u)
    outside = position_matrix(2 * M, L)[M:, :M]
    leak = np.linalg.norm(spin.gyro * g * outside @ c)
    inside = np.linalg.norm(_x_generator(geom, spin, g, False) @ c)
    return float(leak / inside) if inside > 0 else 0.0


def evolve_fid_spectral(geom: CellGeometry, spin: SpinParams, g: float, t_end: float,
                        n_steps: int = DEFAULT_STEPS, *, subtract_offset: bool = False,
                        initial: ScalarModeVector | None = None) -> FidTrace:
    """Exact Galerkin evolution on a uniform time grid of ``n_steps`` intervals.

    ``g`` is the gradient of B_z along x.  With ``subtract_offset`` the field
    g (x - L/2) is used instead, which removes the mean precession and leaves
    the modulus unchanged.
    """
    check_diffusion_validity(geom, spin)
    times = _time_grid(t_end, n_steps)
    M, L = geom.M, geom.L
    dt = times[1] - times[0]
    coeffs = (initial_coefficient_cube(geom, spin) if initial is None else initial.tensor()).astype(complex)

    u = uniform_overlap(M, L)
    # x: row vector u^T exp(A_x t), advanced by the exact one-step propagator
    step = expm(_x_generator(geom, spin, g, subtract_offset) * dt)
    rows = np.empty((times.size, M), dtype=complex)
    rows[0] = u
    for k in range(1, times.size):
        rows[k] = rows[k - 1] @ step
    # y, z: diagonal decay; Gamma0 factored out
    m2 = np.arange(1, M + 1) ** 2
    side = u[None, :] * np.exp(-spin.D * geom.wavenumber ** 2 * np.outer(times, m2))

    partial = np.einsum("mnl,tl->tmn", coeffs, side)
    partial = np.einsum("tmn,tn->tm", partial, side)
    avg = np.exp(-spin.gamma0 * times) * np.einsum("tm,tm->t", partial, rows)
    if avg[0] == 0:
        raise DegenerateParametersError("initial average polarization is zero (R = 0?)")

    notes = []
    leak = truncation_leak(geom, spin, g, coeffs)
    if leak > TRUNCATION_TOL:
        notes.append(f"truncation M={M}: coupling tail {leak:.3g} exceeds {TRUNCATION_TOL:g}")
    return FidTrace(times, avg / avg[0], tuple(notes))


# ---------------------------------------------------------------------------
# finite-difference solver
# ---------------------------------------------------------------------------

def _fd_initial(geom: CellGeometry, spin: SpinParams,
                initial: np.ndarray | Callable | None) -> np.ndarray:
    N = geom.N
    if initial is None:
        return fdgrid.steady_state_scalar(geom, spin.D, spin.gamma0, spin.R)
    if callable(initial):
        x = geom.grid()
        return np.asarray(initial(x[:, None, None], x[None, :, None], x[None, None, :]), dtype=complex) \
            * np.ones((N, N, N))
    initial = np.asarray(initial)
    if initial.shape != (N, N, N):
        raise ValueError(f"initial field must have shape {(N, N, N)}, got {initial.shape}")
    return initial


def evolve_fid_fd(geom: CellGeometry, spin: SpinParams, g: float, t_end: float,
                  n_steps: int = DEFAULT_STEPS, *, subtract_offset: bool = False,
                  initial: np.ndarray | Callable | None = None,
                  return_field: bool = False, method: str = "auto"):
    """Crank-Nicolson evolution on the N^3 interior grid.

    The y and z directions are diagonalized with the sine transform (exact
    for the discrete Laplacian), leaving one complex tridiagonal operator
    T + s_nl along x per (n, l) pair.  ``method="eig"`` diagonalizes T once
    and applies the Crank-Nicolson amplification factors; ``"thomas"``
    sweeps the tridiagonal systems step by step.  ``"auto"`` uses the
    eigenbasis unless it is too ill-conditioned to reproduce a step.

    With ``return_field`` the final nodal field is returned alongside the
    trace (including zero boundary layers).
    """
    check_diffusion_validity(geom, spin)
    if method not in ("auto", "eig", "thomas"):
        raise ValueError(f"unknown method {method!r}")
    times = _time_grid(t_end, n_steps)
    N, h, L = geom.N, geom.grid_spacing, geom.L
    tau = (times[1] - times[0]) / 2

    S = fdgrid.dst_matrix(N)
    lam = fdgrid.laplacian_eigenvalues(N, h)
    colsum = S.sum(axis=0)
    x = geom.grid()
    bz = spin.gyro * g * (x - (L / 2 if subtract_offset else 0.0))
    off = spin.D / h ** 2
    tri = np.diag(-2 * off - 1j * bz) + off * (np.eye(N, k=1) + np.eye(N, k=-1))
    shift = spin.D * (lam[:, None] + lam[None, :]) - spin.gamma0

    p0 = fdgrid.transform(_fd_initial(geom, spin, initial).astype(complex), S, axes=(1, 2))
    weight = (h / L) ** 3
    avg0 = np.einsum("inl,n,l->", p0, colsum, colsum) * weight
    if avg0 == 0:
        raise DegenerateParametersError("initial average polarization is zero")

    result = None
    if method in ("auto", "eig"):
        result = _cn_eig(tri, shift, tau, p0, times.size, colsum, weight)
        if result is None and method == "eig":
            raise SolverError("Crank-Nicolson eigenbasis is too ill-conditioned")
    if result is None:
        result = _cn_thomas(tri, shift, tau, p0, times.size, colsum, weight)
    avg, p = result

    trace = FidTrace(times, avg / avg0)
    if return_field:
        return trace, np.pad(fdgrid.transform(p, S, axes=(1, 2)), 1)
    return trace


def _cn_residual(tri, shift, tau, old, new) -> float:
    """Relative residual of (I - tau A) new = (I + tau A) old for A = T + shift."""
    def apply(a):
        return np.tensordot(tri, a, axes=([1], [0])) + shift[None] * a
    lhs = new - tau * apply(new)
    rhs = old + tau * apply(old)
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


def _cn_eig(tri, shift, tau, p0, n_times, colsum, weight, tol=1e-10):
    evals, V = np.linalg.eig(tri)
    try:
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError:
        return None
    rate = evals[:, None, None] + shift[None]
    amp = (1 + tau * rate) / (1 - tau * rate)
    coef = np.tensordot(Vinv, p0, axes=([1], [0]))
    p1 = np.tensordot(V, amp * coef, axes=([1], [0]))
    if not _cn_residual(tri, shift, tau, p0, p1) <= tol:
        return None
    # mean at step k is sum_q c_q amp_q^k
    z = coef * (V.sum(axis=0)[:, None, None] * colsum[None, :, None] * colsum[None, None, :]) * weight
    avg = np.empty(n_times, dtype=complex)
    avg[0] = z.sum()
    for k in range(1, n_times):
        z *= amp
        avg[k] = z.sum()
    p = np.tensordot(V, coef * amp ** (n_times - 1), axes=([1], [0]))
    return avg, p


def _cn_thomas(tri, shift, tau, p0, n_times, colsum, weight):
    N = tri.shape[0]
    off = tri[0, 1].real
    diag = np.diag(tri)[:, None, None] + shift[None]
    lhs_diag = 1 - tau * diag
    c = -tau * off
    inv_b = np.empty_like(lhs_diag)
    cp = np.empty_like(lhs_diag)
    inv_b[0] = 1 / lhs_diag[0]
    cp[0] = c * inv_b[0]
    for i in range(1, N):
        inv_b[i] = 1 / (lhs_diag[i] - c * cp[i - 1])
        cp[i] = c * inv_b[i]

    p = p0.copy()
    avg = np.empty(n_times, dtype=complex)
    avg[0] = np.einsum("inl,n,l->", p, colsum, colsum) * weight
    rhs = np.empty_like(p)
    for k in range(1, n_times):
        rhs[:] = p + tau * diag * p
        rhs[1:] += tau * off * p[:-1]
        rhs[:-1] += tau * off * p[1:]
        old = p.copy() if k == 1 else None
        p[0] = rhs[0] * inv_b[0]
        for i in range(1, N):
            p[i] = (rhs[i] - c * p[i - 1]) * inv_b[i]
        for i in range(N - 2, -1, -1):
            p[i] -= cp[i] * p[i + 1]
        if old is not None:
            rel = _cn_residual(tri, shift, tau, old, p)
            if not rel <= 1e-10:
                raise SolverError(f"Crank-Nicolson tridiagonal solve residual {rel:.3g}", residual=rel)
        avg[k] = np.einsum("inl,n,l->", p, colsum, colsum) * weight
    return avg, p


# ---------------------------------------------------------------------------
# relaxation-rate extraction
# ---------------------------------------------------------------------------

def extract_t2(trace: FidTrace) -> RelaxationResult:
    """T2 is the first time |P| falls to 1/e; the phase rate is -d(arg P)/dt."""
    target = math.exp(-1)
    mod = trace.modulus / abs(trace.values[0])
    below = np.nonzero(mod <= target)[0]
    if below.size == 0:
        raise InsufficientHorizonError(
            f"|P| stays above 1/e up to t = {trace.times[-1]:.4g} s; extend the horizon")
    k = int(below[0])
    if k == 0:
        raise ValueError("trace starts below 1/e")
    t = trace.times
    if mod[k] == target:
        T2 = float(t[k])
    else:
        lo, hi = max(k - 2, 0), min(k + 2, t.size - 1)
        local = PchipInterpolator(t[lo:hi + 1], mod[lo:hi + 1])
        T2 = float(brentq(lambda s: local(s) - target, t[k - 1], t[k], xtol=1e-15, rtol=1e-14))

    upto = min(k + 1, t.size - 1)
    phase = trace.phase[: upto + 1]
    slope = np.polyfit(t[: upto + 1], phase, 1)[0] if upto >= 1 else 0.0
    return RelaxationResult(T2=T2, gamma2=1.0 / T2, phase_rate=float(-slope))


def _solver(name: str):
    try:
        return {"spectral": evolve_fid_spectral, "fd": evolve_fid_fd}[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; expected 'spectral' or 'fd'") from None


def base_horizon(geom: CellGeometry, spin: SpinParams) -> float:
    """Starting time horizon: HORIZON_START lifetimes of the slowest mode."""
    return HORIZON_START / mode_decay_rate(geom, spin, (1, 1, 1))


def _with_horizon(run, geom, spin):
    t_end = base_horizon(geom, spin)
    cap = t_end * HORIZON_CAP / HORIZON_START
    while True:
        try:
            return run(t_end)
        except InsufficientHorizonError:
            if t_end >= cap:
                raise
            t_end = min(2 * t_end, cap)


def relaxation(geom: CellGeometry, spin: SpinParams, g: float, *, solver: str = "spectral",
               n_steps: int = DEFAULT_STEPS, subtract_offset: bool = False) -> RelaxationResult:
    """Gamma2 at gradient g together with its excess over the g = 0 run.

    Both runs share one time grid; the horizon starts at 5 lifetimes of the
    slowest diffusion mode and doubles until both traces cross 1/e.
    """
    evolve = _solver(solver)

    def run(t_end):
        res0 = extract_t2(evolve(geom, spin, 0.0, t_end, n_steps))
        if g == 0:
            res = res0
        else:
            res = extract_t2(evolve(geom, spin, g, t_end, n_steps, subtract_offset=subtract_offset))
        return RelaxationResult(res.T2, res.gamma2, res.gamma2 - res0.gamma2, res.phase_rate)

    return _with_horizon(run, geom, spin)


def relaxation_rate(geom: CellGeometry, spin: SpinParams, g: float, *, solver: str = "spectral",
                    n_steps: int = DEFAULT_STEPS, subtract_offset: bool = False) -> RelaxationResult:
    """Gamma2 at gradient g alone (auto horizon)."""
    evolve = _solver(solver)
    return _with_horizon(
        lambda t_end: extract_t2(evolve(geom, spin, g, t_end, n_steps, subtract_offset=subtract_offset)),
        geom, spin)


def delta_gamma2(geom: CellGeometry, spin: SpinParams, g: float, *, solver: str = "spectral",
                 n_steps: int = DEFAULT_STEPS) -> float:
    """Gamma2(g) - Gamma2(0) on a shared grid."""
    return relaxation(geom, spin, g, solver=solver, n_steps=n_steps).delta_gamma2
