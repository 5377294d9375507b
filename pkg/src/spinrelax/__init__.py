"""Relaxation of diffusing spins in linear field gradients inside a cell with depolarizing walls."""

from .core import (
    CellGeometry,
    GradientField,
    ModeIndex,
    ScalarModeVector,
    SpinParams,
    gradient_matrix_element,
    initial_coefficient,
    mode_decay_rate,
    nuclear_comparison_rate,
)
from .evolution import (
    FidTrace,
    RelaxationResult,
    delta_gamma2,
    evolve_fid_fd,
    evolve_fid_spectral,
    extract_t2,
    relaxation,
    relaxation_rate,
    steady_state_longitudinal,
)
from .perturbation import (
    closed_form_second_order_rate,
    effective_frequency,
    mode_weight,
    perturbation_parameter,
    perturbative_fid,
    second_order_rate,
    upper_bound_rate,
)
from .serf import (
    LinewidthSweep,
    SerfScenario,
    SteadyState,
    divergence_free_config,
    linewidth_broadening,
    mean_sx,
    steady_state_bloch,
    sweep_by,
    symmetry_check_xz,
)

__version__ = "0.1.0"
