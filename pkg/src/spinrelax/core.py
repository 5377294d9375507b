"""
Cell geometry, spin parameters and the sine eigenbasis of the diffusion operator.

The cell is the cube [0, L]^3 with fully depolarizing walls (zero boundary
values).  The eigenmodes of the Laplacian are products of

    phi_m(x) = sqrt(2/L) sin(m pi x / L),   m = 1, 2, ...

and every linear field profile g * x is represented by the 1-D position
matrix X[m, m'] = int_0^L phi_m(x) x phi_m'(x) dx, tensored with identities
on the other two axes.

Rates are plain s^-1 throughout.  ``gyro * field`` is treated as a
precession rate in s^-1; nothing in the library multiplies by 2 pi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateParametersError

AXES = ("x", "y", "z")

#: mean-velocity bound for the diffusion description, cm/s (100 m/s)
MAX_MEAN_VELOCITY = 1.0e4


@dataclass(frozen=True)
class CellGeometry:
    """Cubic cell and its discretization knobs.

    Parameters
    ----------
    edge_length : float
        Cell edge L in cm.
    mode_truncation : int
        Highest sine-mode index kept per axis (spectral solvers).
    grid_points : int
        Interior finite-difference nodes per axis.
    """

    edge_length: float
    mode_truncation: int = 15
    grid_points: int = 48

    def __post_init__(self):
        if not self.edge_length > 0:
            raise ValueError(f"edge_length must be positive, got {self.edge_length}")
        if int(self.mode_truncation) != self.mode_truncation or self.mode_truncation < 1:
            raise ValueError(f"mode_truncation must be an integer >= 1, got {self.mode_truncation}")
        if int(self.grid_points) != self.grid_points or self.grid_points < 3:
            raise ValueError(f"grid_points must be an integer >= 3, got {self.grid_points}")

    @property
    def L(self) -> float:
        return self.edge_length

    @property
    def M(self) -> int:
        return int(self.mode_truncation)

    @property
    def N(self) -> int:
        return int(self.grid_points)

    @property
    def wavenumber(self) -> float:
        """pi / L."""
        return np.pi / self.edge_length

    @property
    def grid_spacing(self) -> float:
        return self.edge_length / (self.N + 1)

    def grid(self) -> np.ndarray:
        """Interior node coordinates along one axis."""
        return self.grid_spacing * np.arange(1, self.N + 1)

    def check_mode(self, idx: Sequence[int]) -> "ModeIndex":
        idx = ModeIndex(*(int(i) for i in idx))
        if min(idx) < 1 or max(idx) > self.M:
            raise ValueError(f"mode {tuple(idx)} outside 1..{self.M}")
        return idx

    def with_truncation(self, mode_truncation: int) -> "CellGeometry":
        return CellGeometry(self.edge_length, mode_truncation, self.grid_points)


@dataclass(frozen=True)
class SpinParams:
    """Physical parameters of the diffusing spins.

    ``gyro`` multiplies every field; with the default of 1 fields and
    gradients are given directly as precession rates (s^-1, s^-1/cm).
    """

    diffusion: float
    gyro: float = 1.0
    base_rate: float = 0.0
    pump_rate: float = 1.0
    slow_down: float = 1.0

    def __post_init__(self):
        if not self.diffusion > 0:
            raise ValueError(f"diffusion must be positive, got {self.diffusion}")
        if self.base_rate < 0:
            raise ValueError(f"base_rate must be >= 0, got {self.base_rate}")
        if self.pump_rate < 0:
            raise ValueError(f"pump_rate must be >= 0, got {self.pump_rate}")
        if self.slow_down < 1:
            raise ValueError(f"slow_down must be >= 1, got {self.slow_down}")
        if not np.isfinite(self.gyro):
            raise ValueError("gyro must be finite")

    @property
    def D(self) -> float:
        return self.diffusion

    @property
    def gamma0(self) -> float:
        return self.base_rate

    @property
    def R(self) -> float:
        return self.pump_rate

    @property
    def q(self) -> float:
        return self.slow_down

    def replace(self, **changes) -> "SpinParams":
        from dataclasses import replace

        return replace(self, **changes)


class ModeIndex(NamedTuple):
    m: int
    n: int
    l: int


@dataclass(frozen=True)
class GradientField:
    """Linear gradients g = (g_x, g_y, g_z) in G/cm.

    Field component alpha at coordinate alpha is ``g_alpha * alpha``, minus
    ``g_alpha * L / 2`` when ``subtract_offset`` is set, so the compensated
    field vanishes at the cell center.
    """

    gx: float = 0.0
    gy: float = 0.0
    gz: float = 0.0
    subtract_offset: bool = True
    divergence_free: bool = False

    def __post_init__(self):
        g = self.g
        if not all(np.isfinite(g)):
            raise ValueError("gradient components must be finite")
        if self.divergence_free:
            scale = max(abs(v) for v in g)
            if abs(sum(g)) > 1e-12 * max(scale, 1e-300):
                raise ValueError(f"gradient {g} is flagged divergence-free but sums to {sum(g)}")

    @property
    def g(self) -> tuple[float, float, float]:
        return (float(self.gx), float(self.gy), float(self.gz))

    def component(self, axis: int | str) -> float:
        return self.g[_axis_index(axis)]

    def field(self, axis: int | str, coord, edge_length: float):
        """Field component along ``axis`` evaluated at coordinate ``coord`` on that axis."""
        g = self.component(axis)
        offset = g * edge_length / 2 if self.subtract_offset else 0.0
        return g * np.asarray(coord) - offset

    def swapped(self, a: int | str, b: int | str) -> "GradientField":
        g = list(self.g)
        i, j = _axis_index(a), _axis_index(b)
        g[i], g[j] = g[j], g[i]
        return GradientField(*g, subtract_offset=self.subtract_offset,
                             divergence_free=self.divergence_free)

    def is_zero(self) -> bool:
        return not any(self.g)


@dataclass(frozen=True)
class ScalarModeVector:
    """Coefficients C_mnl of P(r) = (L/2)^{3/2} sum C_mnl psi_mnl(r).

    ``coefficients`` is flattened in C order over (m, n, l), each running 1..M.
    """

    coefficients: np.ndarray
    geom: CellGeometry

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.shape != (self.geom.M ** 3,):
            raise ValueError(f"expected {self.geom.M ** 3} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")

    def tensor(self) -> np.ndarray:
        M = self.geom.M
        return np.asarray(self.coefficients).reshape(M, M, M)

    def evaluate(self, x, y, z) -> np.ndarray:
        """Reconstruct the field at points (broadcast arrays x, y, z)."""
        L, M = self.geom.L, self.geom.M
        px = sine_modes(M, L, x)
        py = sine_modes(M, L, y)
        pz = sine_modes(M, L, z)
        val = np.einsum("mnl,m...,n...,l...->...", self.tensor(), px, py, pz)
        return (L / 2) ** 1.5 * val

    def mean(self) -> complex:
        """Volume average over the cell."""
        L, M = self.geom.L, self.geom.M
        u = uniform_overlap(M, L)
        avg = np.einsum("mnl,m,n,l->", self.tensor(), u, u, u) * (L / 2) ** 1.5 / L ** 3
        return avg.item()


def _axis_index(axis: int | str) -> int:
    if isinstance(axis, str):
        try:
            return AXES.index(axis.lower())
        except ValueError:
            raise ValueError(f"unknown axis {axis!r}") from None
    if axis not in (0, 1, 2):
        raise ValueError(f"unknown axis {axis!r}")
    return int(axis)


def check_diffusion_validity(geom: CellGeometry, spin: SpinParams,
                             max_mean_velocity: float = MAX_MEAN_VELOCITY) -> None:
    """Raise ValueError when 3D/L reaches the mean-velocity bound."""
    v = 3 * spin.D / geom.L
    if v >= max_mean_velocity:
        raise ValueError(
            f"3D/L = {v:.4g} cm/s is not below {max_mean_velocity:.4g} cm/s; "
            "the diffusion description does not hold"
        )


def sine_modes(M: int, L: float, x) -> np.ndarray:
    """phi_m(x) for m = 1..M; shape (M,) + shape(x)."""
    x = np.asarray(x, dtype=float)
    m = np.arange(1, M + 1).reshape((M,) + (1,) * x.ndim)
    return np.sqrt(2 / L) * np.sin(m * np.pi * x / L)


def uniform_overlap(M: int, L: float) -> np.ndarray:
    """int_0^L phi_m(x) dx for m = 1..M (zero for even m)."""
    m = np.arange(1, M + 1)
    return np.where(m % 2 == 1, np.sqrt(2 / L) * 2 * L / (m * np.pi), 0.0)


def position_matrix(M: int, L: float) -> np.ndarray:
    """X[m, m'] = int_0^L phi_m(x) x phi_m'(x) dx for m, m' = 1..M.

    Diagonal entries are L/2; off-diagonal entries vanish unless m + m' is
    odd, where they equal -8 L m m' / (pi^2 (m^2 - m'^2)^2).
    """
    m = np.arange(1, M + 1)
    mm, mp = np.meshgrid(m, m, indexing="ij")
    diff = mm ** 2 - mp ** 2
    safe = np.where(diff == 0, 1, diff)
    X = np.where((mm + mp) % 2 == 1, -8 * L * (mm * mp) / (np.pi ** 2 * safe.astype(float) ** 2), 0.0)
    X[np.diag_indices(M)] = L / 2
    return X


def mode_eigenvalues(M: int) -> np.ndarray:
    """m^2 + n^2 + l^2 on the (M, M, M) mode cube."""
    m2 = np.arange(1, M + 1) ** 2
    return m2[:, None, None] + m2[None, :, None] + m2[None, None, :]


def mode_decay_rate(geom: CellGeometry, spin: SpinParams, idx: Sequence[int]) -> float:
    """Gamma0 + D (pi/L)^2 (m^2 + n^2 + l^2)."""
    m, n, l = (int(i) for i in idx)
    if min(m, n, l) < 1:
        raise ValueError(f"mode indices must be positive, got {tuple(idx)}")
    return spin.gamma0 + spin.D * geom.wavenumber ** 2 * (m * m + n * n + l * l)


def decay_rate_cube(geom: CellGeometry, spin: SpinParams, M: int | None = None) -> np.ndarray:
    """mode_decay_rate on the full (M, M, M) cube."""
    M = geom.M if M is None else M
    return spin.gamma0 + spin.D * geom.wavenumber ** 2 * mode_eigenvalues(M)


def initial_coefficient(geom: CellGeometry, spin: SpinParams, idx: Sequence[int]) -> float:
    """C_mnl(0) = 64 R / (m n l pi^3 Gamma_mnl) for all-odd modes, else 0."""
    m, n, l = (int(i) for i in idx)
    rate = mode_decay_rate(geom, spin, (m, n, l))
    if rate == 0:
        raise DegenerateParametersError("mode decay rate is zero")
    if m % 2 == 0 or n % 2 == 0 or l % 2 == 0:
        return 0.0
    return 64 * spin.R / (m * n * l * np.pi ** 3 * rate)


def initial_coefficient_cube(geom: CellGeometry, spin: SpinParams, M: int | None = None) -> np.ndarray:
    """initial_coefficient over the (M, M, M) mode cube."""
    M = geom.M if M is None else M
    rates = decay_rate_cube(geom, spin, M)
    if np.any(rates == 0):
        raise DegenerateParametersError("mode decay rate is zero")
    m = np.arange(1, M + 1)
    inv = np.where(m % 2 == 1, 1.0 / m, 0.0)
    return 64 * spin.R * inv[:, None, None] * inv[None, :, None] * inv[None, None, :] / (np.pi ** 3 * rates)


def gradient_matrix_element(geom: CellGeometry, axis: int | str,
                            a: Sequence[int], b: Sequence[int]) -> float:
    """Matrix element of the unit-gradient profile along ``axis`` between modes a and b.

    Factorizes as X[a_axis, b_axis] times Kronecker deltas on the other two
    indices.  Units: cm.
    """
    k = _axis_index(axis)
    a = tuple(int(i) for i in a)
    b = tuple(int(i) for i in b)
    if min(a + b) < 1:
        raise ValueError("mode indices must be positive")
    for j in range(3):
        if j != k and a[j] != b[j]:
            return 0.0
    ma, mb = a[k], b[k]
    L = geom.L
    if ma == mb:
        return L / 2
    if (ma + mb) % 2 == 0:
        return 0.0
    return -8 * L * (ma * mb) / (np.pi ** 2 * (ma * ma - mb * mb) ** 2)


def nuclear_comparison_rate(geom: CellGeometry, spin: SpinParams, g: float) -> float:
    """gamma^2 g^2 L^4 / (120 D): the gradient rate with non-depolarizing walls."""
    if spin.D == 0:
        raise DegenerateParametersError("diffusion constant is zero")
    return (spin.gyro * g) ** 2 * geom.L ** 4 / (120 * spin.D)
