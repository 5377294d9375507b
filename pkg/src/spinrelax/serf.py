"""
Steady-state electron spin in a SERF magnetometer with field gradients.

Solves

    D q lap(S) + gamma [B(r) + B_y e_y] x S - Gamma0 S + (R/2) e_z = 0,
    S = 0 on the walls,

for B(r) = sum_a g_a (a - L/2) e_a, and extracts the linewidth w of the
dispersive response of the cell-averaged S_x to the uniform field B_y.

Two discretizations share one matrix-free Krylov driver:

* ``"spectral"``: sine-mode Galerkin (3 M^3 unknowns).  Each field component
  acts as the position matrix along its own axis.
* ``"fd"``: 3-point differences on the N^3 interior grid (3 N^3 unknowns).

Both are preconditioned by the exact inverse of the diffusion, relaxation
and uniform-field part, which is block 3x3 per sine mode.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from . import fdgrid
from .core import (
    CellGeometry,
    GradientField,
    SpinParams,
    check_diffusion_validity,
    mode_eigenvalues,
    position_matrix,
    uniform_overlap,
)
from .errors import SolverError, SweepRangeError

CONVENTIONS = ("literal-q", "scaled-q")
RESIDUAL_TOL = 1e-10
SWEEP_SPAN = 6.0
MAX_EXTENSIONS = 4


@dataclass(frozen=True)
class SerfScenario:
    geom: CellGeometry
    spin: SpinParams
    gradient: GradientField = GradientField()
    b_y: float = 0.0

    def __post_init__(self):
        if not self.gradient.subtract_offset:
            raise ValueError("SERF gradients are always offset-compensated")
        check_diffusion_validity(self.geom, self.spin)

    def with_by(self, b_y: float) -> "SerfScenario":
        return replace(self, b_y=float(b_y))

    def with_gradient(self, gradient: GradientField) -> "SerfScenario":
        return replace(self, gradient=gradient)


@dataclass(frozen=True)
class SteadyState:
    """Solution of the steady-state Bloch equation.

    ``components`` has shape (3, K, K, K): mode coefficients
    int psi_mnl S_a dV for the spectral basis, nodal values for ``"fd"``.
    """

    components: np.ndarray
    mean: np.ndarray
    basis: str
    residual: float
    iterations: int

    @property
    def sx(self) -> float:
        return float(self.mean[0])


@dataclass(frozen=True)
class LinewidthSweep:
    by_values: np.ndarray
    sx_values: np.ndarray
    w: float
    b_min: float
    b_max: float
    sx_min: float
    sx_max: float


def effective_coefficients(spin: SpinParams, convention: str = "literal-q"):
    """(diffusion, gyro, pump) entering the steady-state equation.

    ``literal-q`` puts q on the diffusion term only; ``scaled-q`` keeps D and
    divides the precession and pumping terms by q instead.
    """
    if convention == "literal-q":
        return spin.D * spin.q, spin.gyro, spin.R
    if convention == "scaled-q":
        return spin.D, spin.gyro / spin.q, spin.R / spin.q
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

class _System:
    """Matrix-free operator K, block preconditioner and source for one scenario."""

    def __init__(self, scenario: SerfScenario, method: str, convention: str):
        geom, spin = scenario.geom, scenario.spin
        diff, gyro, pump = effective_coefficients(spin, convention)
        L = geom.L
        self.method = method
        # the equation is linear in the pump: solve for unit pump, scale afterwards
        self.pump = pump
        g = np.array(scenario.gradient.g) * gyro
        s = 1.0 if scenario.gradient.subtract_offset else 0.0
        # uniform part of each field component (rate units)
        uniform = g * (L / 2) * (1 - s)
        uniform[1] += gyro * scenario.b_y
        self.uniform = uniform

        if method == "spectral":
            K = geom.M
            self.shape = (3, K, K, K)
            X = position_matrix(K, L) - (L / 2) * np.eye(K)
            self.axis_mats = [g[a] * X if g[a] else None for a in range(3)]
            self.field_ops = [self._axis_op(m, a) if m is not None else None
                              for a, m in enumerate(self.axis_mats)]
            decay = -diff * geom.wavenumber ** 2 * mode_eigenvalues(K) - spin.gamma0
            self.diffusion_op = lambda v: decay * v
            u = uniform_overlap(K, L)
            self.weights = u[:, None, None] * u[None, :, None] * u[None, None, :] / L ** 3
            source = 0.5 * u[:, None, None] * u[None, :, None] * u[None, None, :]
            self.to_modes = self.from_modes = lambda a: a
            self.mode_decay = decay
        elif method == "fd":
            K, h = geom.N, geom.grid_spacing
            self.shape = (3, K, K, K)
            # centred profiles; the uncompensated offset sits in ``uniform``
            x = geom.grid() - L / 2
            profiles = [x[:, None, None], x[None, :, None], x[None, None, :]]
            self.field_ops = [
                (lambda v, f=g[a] * profiles[a]: f * v) if g[a] else None for a in range(3)
            ]
            self.diffusion_op = lambda v: diff * fdgrid.laplacian_3d(v, h) - spin.gamma0 * v
            self.weights = np.full((K, K, K), (h / L) ** 3)
            source = np.full((K, K, K), 0.5)
            S = fdgrid.dst_matrix(K)
            lam = fdgrid.laplacian_eigenvalues(K, h)
            total = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
            self.mode_decay = diff * total - spin.gamma0
            self.to_modes = self.from_modes = lambda a, S=S: fdgrid.transform(a, S, axes=(1, 2, 3))
        else:
            raise ValueError(f"unknown method {method!r}; expected 'spectral' or 'fd'")

        rhs = np.zeros(self.shape)
        rhs[2] = -source
        self.rhs = rhs.ravel()

        d = self.mode_decay
        ux, uy, uz = uniform
        blocks = np.empty(d.shape + (3, 3))
        blocks[..., 0, :] = np.stack(np.broadcast_arrays(d, -uz, uy), axis=-1)
        blocks[..., 1, :] = np.stack(np.broadcast_arrays(uz, d, -ux), axis=-1)
        blocks[..., 2, :] = np.stack(np.broadcast_arrays(-uy, ux, d), axis=-1)
        self.blocks = blocks
        self.block_inv = np.linalg.inv(blocks)

    @staticmethod
    def _axis_op(matrix, axis):
        def op(v):
            return np.moveaxis(np.tensordot(matrix, v, axes=([1], [axis])), 0, axis)
        return op

    def _field(self, a, v):
        op = self.field_ops[a]
        out = self.uniform[a] * v
        if op is not None:
            out = out + op(v)
        return out

    def matvec(self, flat):
        sx, sy, sz = flat.reshape(self.shape)
        F = self._field
        out = np.empty(self.shape)
        out[0] = self.diffusion_op(sx) - F(2, sy) + F(1, sz)
        out[1] = F(2, sx) + self.diffusion_op(sy) - F(0, sz)
        out[2] = -F(1, sx) + F(0, sy) + self.diffusion_op(sz)
        return out.ravel()

    def precondition(self, flat):
        modes = self.to_modes(flat.reshape(self.shape))
        solved = np.einsum("...ij,j...->i...", self.block_inv, modes)
        return self.from_modes(solved).ravel()

    def condition_estimate(self) -> float:
        return float(np.max(np.linalg.cond(self.blocks)))

    def sparse_matrix(self):
        """Assembled sparse K (spectral basis only; meant for small M)."""
        if self.method != "spectral":
            raise ValueError("sparse assembly is only available for the spectral basis")
        K = self.shape[1]
        I = sparse.identity(K, format="csr")

        def field(a):
            out = self.uniform[a] * sparse.identity(K ** 3, format="csr")
            if self.axis_mats[a] is not None:
                factors = [I, I, I]
                factors[a] = sparse.csr_matrix(self.axis_mats[a])
                out = out + sparse.kron(sparse.kron(factors[0], factors[1]), factors[2])
            return out

        Fx, Fy, Fz = field(0), field(1), field(2)
        D0 = sparse.diags(self.mode_decay.ravel())
        return sparse.bmat([[D0, -Fz, Fy], [Fz, D0, -Fx], [-Fy, Fx, D0]], format="csc")


def steady_state_bloch(scenario: SerfScenario, *, method: str = "spectral",
                       convention: str = "literal-q", linear_solver: str = "krylov",
                       rtol: float = 1e-12) -> SteadyState:
    """Solve the steady-state Bloch equation for one scenario."""
    unit = _unit_pump_state(scenario, method, convention, linear_solver, rtol)
    return replace(unit, components=unit.components * unit.pump, mean=unit.mean * unit.pump)


@dataclass(frozen=True)
class _UnitState(SteadyState):
    pump: float = 1.0


def _unit_pump_state(scenario, method, convention, linear_solver, rtol) -> _UnitState:
    system = _System(scenario, method, convention)
    n = system.rhs.size
    rhs_norm = np.linalg.norm(system.rhs)
    if rhs_norm == 0:
        return _UnitState(np.zeros(system.shape), np.zeros(3), method, 0.0, 0, system.pump)

    iterations = 0
    if linear_solver == "direct":
        solution = spla.spsolve(system.sparse_matrix(), system.rhs)
    elif linear_solver == "krylov":
        A = spla.LinearOperator((n, n), matvec=system.matvec, dtype=float)
        P = spla.LinearOperator((n, n), matvec=system.precondition, dtype=float)
        counter = [0]

        def count(_):
            counter[0] += 1

        solution, info = spla.gmres(A, system.rhs, M=P, rtol=rtol, atol=0.0, restart=200,
                                    maxiter=20, callback=count, callback_type="pr_norm")
        iterations = counter[0]
    else:
        raise ValueError(f"unknown linear solver {linear_solver!r}")

    residual = float(np.linalg.norm(system.matvec(solution) - system.rhs) / rhs_norm)
    if not residual <= RESIDUAL_TOL:
        raise SolverError(
            f"steady-state solve stopped at relative residual {residual:.3g} after {iterations} iterations",
            residual=residual, condition_estimate=system.condition_estimate())
    comps = solution.reshape(system.shape)
    mean = np.array([(system.weights * comps[a]).sum() for a in range(3)])
    return _UnitState(comps, mean, method, residual, iterations, system.pump)


def mean_sx(scenario: SerfScenario, **kwargs) -> float:
    return steady_state_bloch(scenario, **kwargs).sx


# ---------------------------------------------------------------------------
# linewidth
# ---------------------------------------------------------------------------

def default_by_grid(scenario: SerfScenario, convention: str = "literal-q",
                    span: float | None = None, points: int = 20) -> np.ndarray:
    """Symmetric B_y grid, log-dense near zero.

    The half-width is 6 (Gamma0 + 3 D q (pi/L)^2) / gamma unless ``span`` is given.
    """
    diff, gyro, _ = effective_coefficients(scenario.spin, convention)
    if span is None:
        rate = scenario.spin.gamma0 + 3 * diff * scenario.geom.wavenumber ** 2
        span = SWEEP_SPAN * rate / abs(gyro)
    side = np.geomspace(span * 1e-3, span, points)
    return np.concatenate([-side[::-1], [0.0], side])


def _refine(f: Callable[[float], float], b: np.ndarray, s: np.ndarray, i: int, sign: float,
            xtol: float) -> tuple[float, float]:
    """Locate the extremum of sign * f bracketed by grid points i-1 .. i+1."""
    lo, hi = b[i - 1], b[i + 1]
    res = minimize_scalar(lambda v: -sign * f(v), bounds=(lo, hi), method="bounded",
                          options={"xatol": xtol})
    x = float(res.x)
    val = -sign * float(res.fun)
    if sign * val < sign * s[i]:
        return float(b[i]), float(s[i])
    return x, val


def sweep_by(scenario: SerfScenario, by_grid: Sequence[float] | None = None, *,
             method: str = "spectral", convention: str = "literal-q",
             xtol_rel: float = 1e-7, executor: Executor | None = None,
             max_extensions: int = MAX_EXTENSIONS) -> LinewidthSweep:
    """Sample S_x(B_y), locate both extrema and return the linewidth.

    The extrema are first located on the grid (which is widened if an
    extremum sits on its edge), then refined by bounded Brent maximization
    between the neighbouring samples.
    """
    # extrema are located on the unit-pump response so that w does not depend on R
    def f(b):
        return _unit_pump_state(scenario.with_by(b), method, convention, "krylov", 1e-12).sx

    grid = np.sort(np.asarray(default_by_grid(scenario, convention) if by_grid is None else by_grid,
                              dtype=float))
    if grid.size < 3:
        raise ValueError("B_y grid needs at least three points")

    for attempt in range(max_extensions + 1):
        if executor is None:
            sx = np.array([f(b) for b in grid])
        else:
            sx = np.array(list(executor.map(f, grid)))
        i_max, i_min = int(np.argmax(sx)), int(np.argmin(sx))
        edges = (0, grid.size - 1)
        if i_max not in edges and i_min not in edges:
            break
        if attempt == max_extensions:
            raise SweepRangeError(f"S_x extremum at the edge of B_y in [{grid[0]:.4g}, {grid[-1]:.4g}]")
        grid = np.concatenate([grid, 2 * grid[grid < 0], 2 * grid[grid > 0]])
        grid = np.unique(grid)

    scale = max(abs(grid[i_max] - grid[i_min]), np.finfo(float).tiny)
    b_max, s_max = _refine(f, grid, sx, i_max, 1.0, xtol_rel * scale)
    b_min, s_min = _refine(f, grid, sx, i_min, -1.0, xtol_rel * scale)
    w = abs(b_max - b_min) / 2
    pump = effective_coefficients(scenario.spin, convention)[2]
    return LinewidthSweep(grid, sx * pump, w, b_min, b_max, s_min * pump, s_max * pump)


def linewidth_broadening(scenario: SerfScenario, by_grid: Sequence[float] | None = None,
                         **kwargs) -> float:
    """w(scenario) - w(same scenario without gradients), on one B_y grid."""
    convention = kwargs.get("convention", "literal-q")
    if by_grid is None:
        by_grid = default_by_grid(scenario, convention)
    base = scenario.with_gradient(GradientField())
    w0 = sweep_by(base, by_grid, **kwargs).w
    if scenario.gradient.is_zero():
        return 0.0
    return sweep_by(scenario, by_grid, **kwargs).w - w0


# ---------------------------------------------------------------------------
# gradient configurations and symmetry
# ---------------------------------------------------------------------------

def divergence_free_config(case_id: int, g_z: float) -> GradientField:
    """Divergence-free gradient triples with a given g_z.

    1: g_x = -g_z, g_y = 0;  2: g_x = g_y = -g_z/2;  3: g_y = -g_z, g_x = 0.
    """
    g_z = float(g_z)
    if case_id == 1:
        g = (-g_z, 0.0, g_z)
    elif case_id == 2:
        g = (-g_z / 2, -g_z / 2, g_z)
    elif case_id == 3:
        g = (0.0, -g_z, g_z)
    else:
        raise ValueError(f"unknown divergence-free case {case_id!r}; expected 1, 2 or 3")
    return GradientField(*g, subtract_offset=True, divergence_free=True)


def swap_residual(scenario: SerfScenario, a: str = "x", b: str = "z", *,
                  eps: float = 1e-300, **kwargs) -> float:
    """|S_x - S_x(swapped)| / max(|S_x|, eps) for the gradient components a <-> b swapped."""
    sx = mean_sx(scenario, **kwargs)
    sx_swapped = mean_sx(scenario.with_gradient(scenario.gradient.swapped(a, b)), **kwargs)
    return abs(sx - sx_swapped) / max(abs(sx), eps)


def symmetry_check_xz(scenario: SerfScenario, **kwargs) -> float:
    """Relative change of S_x when the x and z gradient profiles are exchanged."""
    return swap_residual(scenario, "x", "z", **kwargs)
