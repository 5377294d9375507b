"""
Second-order perturbation theory for a longitudinal field B_z = g x.

To first order every mode picks up the same precession frequency
gamma g L / 2.  To second order the decay rate of mode (m, n, l) shifts by

    Gamma2_m = (gamma g)^2 sum_{m' != m} X[m, m']^2 / (Gamma_m' - Gamma_m),

which depends on m only.  The denominator is ordered so that the lowest
mode gets a positive (broadening) correction, matching the closed forms in
``closed_form_second_order_rate``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    CellGeometry,
    ModeIndex,
    SpinParams,
    mode_decay_rate,
    position_matrix,
)
from .errors import DegeneracyError, DegenerateParametersError, PerturbationRegimeWarning
from .evolution import FidTrace

#: second-order rate in units of gamma^2 g^2 L^4 / D, for m = 1, 2, 3
CLOSED_FORM_COEFFICIENTS = {
    1: (15 - np.pi ** 2) / (48 * np.pi ** 4),
    2: (15 - 4 * np.pi ** 2) / (768 * np.pi ** 4),
    3: -(3 * np.pi ** 2 - 5) / (1296 * np.pi ** 4),
}

WARN_THRESHOLD = 0.3
DEFAULT_INCLUDED = (1, 3)


@dataclass(frozen=True)
class ModeEntry:
    idx: ModeIndex
    omega1: float
    gamma0: float
    gamma2: float
    weight: float

    @property
    def rate(self) -> float:
        return self.gamma0 + self.gamma2


@dataclass(frozen=True)
class PerturbativeSpectrum:
    entries: tuple[ModeEntry, ...]

    def __post_init__(self):
        total = sum(e.weight for e in self.entries)
        if abs(total - 1) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")
        omegas = {e.omega1 for e in self.entries}
        if len(omegas) > 1:
            raise ValueError("omega1 must be shared by all modes")

    @property
    def omega1(self) -> float:
        return self.entries[0].omega1

    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries])

    def rates(self) -> np.ndarray:
        return np.array([e.rate for e in self.entries])


def perturbation_parameter(geom: CellGeometry, spin: SpinParams, g: float) -> float:
    """16 gamma g L^3 / (27 pi^4 D).

    The largest coupling-to-gap ratio of the linear gradient, reached
    between modes 1 and 2.
    """
    if g < 0:
        raise ValueError(f"gradient magnitude must be >= 0, got {g}")
    if spin.D == 0:
        raise DegenerateParametersError("diffusion constant is zero")
    return 16 * abs(spin.gyro) * g * geom.L ** 3 / (27 * np.pi ** 4 * spin.D)


def check_regime(geom: CellGeometry, spin: SpinParams, g: float) -> float:
    """Raise if the expansion parameter is >= 1, warn if it is >= 0.3."""
    p = perturbation_parameter(geom, spin, abs(g))
    if p >= 1:
        raise ValueError(f"perturbation parameter {p:.3g} >= 1; use the time-domain solvers")
    if p >= WARN_THRESHOLD:
        warnings.warn(f"perturbation parameter {p:.3g} is not small", PerturbationRegimeWarning,
                      stacklevel=3)
    return p


def effective_frequency(geom: CellGeometry, spin: SpinParams, g: float) -> float:
    """First-order precession rate gamma g L / 2, shared by all modes."""
    return spin.gyro * g * geom.L / 2


def closed_form_second_order_rate(geom: CellGeometry, spin: SpinParams, g: float, m: int) -> float:
    """Closed-form Gamma2 for m = 1, 2, 3 (untruncated sum)."""
    try:
        coeff = CLOSED_FORM_COEFFICIENTS[int(m)]
    except KeyError:
        raise ValueError(f"closed form only known for m = 1, 2, 3, got {m}") from None
    if spin.D == 0:
        raise DegenerateParametersError("diffusion constant is zero")
    return (spin.gyro * g) ** 2 * geom.L ** 4 / spin.D * coeff


def upper_bound_rate(geom: CellGeometry, spin: SpinParams, g: float) -> float:
    """Gamma2 of the lowest mode, an upper bound on the gradient-induced rate."""
    return closed_form_second_order_rate(geom, spin, g, 1)


def second_order_rate(geom: CellGeometry, spin: SpinParams, g: float, idx: Sequence[int],
                      check: bool = True) -> float:
    """Truncated second-order decay-rate shift of mode ``idx`` (sum over m' <= M)."""
    idx = geom.check_mode(idx)
    if check:
        check_regime(geom, spin, abs(g))
    if g == 0:
        return 0.0
    M = geom.M
    X = position_matrix(M, geom.L)
    m, n, l = idx
    rate_m = mode_decay_rate(geom, spin, idx)
    total = 0.0
    for mp in range(1, M + 1):
        if mp == m:
            continue
        rate_mp = mode_decay_rate(geom, spin, (mp, n, l))
        coupling = X[m - 1, mp - 1]
        gap = rate_mp - rate_m
        if abs(gap) < 1e-9 * abs(rate_m):
            if coupling != 0:
                raise DegeneracyError(f"modes {m} and {mp} are degenerate but coupled")
            continue
        total += coupling ** 2 / gap
    return (spin.gyro * g) ** 2 * total


def _odd_set(included: Iterable[int]) -> tuple[int, ...]:
    included = tuple(sorted(set(int(i) for i in included)))
    if not included or any(i < 1 or i % 2 == 0 for i in included):
        raise ValueError(f"included indices must be positive odd integers, got {included}")
    return included


def _included_modes(included: Sequence[int]) -> list[ModeIndex]:
    return [ModeIndex(m, n, l) for m in included for n in included for l in included]


def mode_weight(geom: CellGeometry, spin: SpinParams, idx: Sequence[int],
                included: Sequence[int] = DEFAULT_INCLUDED) -> float:
    """Share of mode ``idx`` in the initial average transverse polarization.

    Proportional to 1 / ((m n l)^2 Gamma_mnl), normalized over the cube
    ``included``^3.
    """
    included = _odd_set(included)
    idx = ModeIndex(*(int(i) for i in idx))
    if any(i not in included for i in idx):
        raise ValueError(f"mode {tuple(idx)} is not in the included set {included}")
    raw = {k: 1.0 / ((k.m * k.n * k.l) ** 2 * mode_decay_rate(geom, spin, k))
           for k in _included_modes(included)}
    return raw[idx] / sum(raw.values())


def perturbative_spectrum(geom: CellGeometry, spin: SpinParams, g: float,
                          included: Sequence[int] = DEFAULT_INCLUDED) -> PerturbativeSpectrum:
    included = _odd_set(included)
    if max(included) > geom.M:
        raise ValueError(f"included index {max(included)} exceeds truncation {geom.M}")
    check_regime(geom, spin, abs(g))
    modes = _included_modes(included)
    raw = np.array([1.0 / ((k.m * k.n * k.l) ** 2 * mode_decay_rate(geom, spin, k)) for k in modes])
    weights = raw / raw.sum()
    omega1 = effective_frequency(geom, spin, g)
    gamma2 = {m: second_order_rate(geom, spin, g, (m, 1, 1), check=False) for m in included}
    entries = tuple(
        ModeEntry(k, omega1, mode_decay_rate(geom, spin, k), gamma2[k.m], float(w))
        for k, w in zip(modes, weights)
    )
    return PerturbativeSpectrum(entries)


def perturbative_fid(geom: CellGeometry, spin: SpinParams, g: float, times,
                     included: Sequence[int] = DEFAULT_INCLUDED) -> FidTrace:
    """Normalized average transverse polarization from the perturbative spectrum.

    exp(-i omega1 t) sum_mnl w_mnl exp(-(Gamma0_mnl + Gamma2_m) t)
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("empty time grid")
    spec = perturbative_spectrum(geom, spin, g, included)
    decay = np.exp(-np.outer(times, spec.rates())) @ spec.weights()
    values = np.exp(-1j * spec.omega1 * times) * decay
    return FidTrace(times, values)
