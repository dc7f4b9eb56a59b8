"""Structured singular values of nonnegative matrices and positive systems.

The package computes tight scaling bounds on the structured singular value
of elementwise nonnegative matrices, certifies robust stability of positive
feedback loops from the zero-frequency gain alone, and applies both to
power-controlled interference networks with uncertain cross gains.
"""

from .errors import (
    InfeasibleProblem,
    InputError,
    NumericalFailure,
    PosmuError,
    UnboundedProblem,
)
from .fm import (
    DelayReport,
    FalsifyResult,
    FMProblem,
    FMRobustReport,
    NominalReport,
    Trajectory,
    build_nominal,
    delay_invariance,
    falsify,
    nominal_feasible,
    robust_test,
    simulate,
    static_loop_matrix,
    trajectory_to_csv,
)
from .mu_core import (
    FeasibilityResult,
    MuResult,
    ScalingVector,
    feasibility_certificate,
    mu_nonneg,
    mu_upper,
    scaled_norm,
    scaling_upper_bound,
    spectral_radius,
)
from .oracles import (
    FeasibilityInstance,
    QPInstance,
    QPResult,
    QSearchResult,
    mu_bruteforce,
    mu_lower_dyad,
    phi,
    positive_qp_relaxation,
    q_feasibility_search,
)
from .structure import (
    BlockSpec,
    BlockStructure,
    ReducedStructure,
    StructuredPerturbation,
    assemble,
    block_norm,
    disassemble,
    dyad_interpolant,
    lift_witness,
    nonnegative_witness,
    reduce_structure,
    sample_boundary,
    validate_structure,
)
from .systems import (
    DominanceReport,
    PositivityReport,
    RobustStabilityResult,
    StateSpaceSystem,
    check_external_positivity,
    check_positive_dominance,
    freq_response,
    frequency_sweep_mu,
    robust_stability,
    static_gain,
)

__version__ = "0.1.0"

__all__ = [
    "BlockSpec",
    "BlockStructure",
    "DelayReport",
    "DominanceReport",
    "FMProblem",
    "FMRobustReport",
    "FalsifyResult",
    "FeasibilityInstance",
    "FeasibilityResult",
    "InfeasibleProblem",
    "InputError",
    "MuResult",
    "NominalReport",
    "NumericalFailure",
    "PositivityReport",
    "PosmuError",
    "QPInstance",
    "QPResult",
    "QSearchResult",
    "ReducedStructure",
    "RobustStabilityResult",
    "ScalingVector",
    "StateSpaceSystem",
    "StructuredPerturbation",
    "Trajectory",
    "UnboundedProblem",
    "assemble",
    "block_norm",
    "build_nominal",
    "check_external_positivity",
    "check_positive_dominance",
    "delay_invariance",
    "disassemble",
    "dyad_interpolant",
    "falsify",
    "feasibility_certificate",
    "freq_response",
    "frequency_sweep_mu",
    "lift_witness",
    "mu_bruteforce",
    "mu_lower_dyad",
    "mu_nonneg",
    "mu_upper",
    "nominal_feasible",
    "nonnegative_witness",
    "phi",
    "positive_qp_relaxation",
    "q_feasibility_search",
    "reduce_structure",
    "robust_stability",
    "robust_test",
    "sample_boundary",
    "scaled_norm",
    "scaling_upper_bound",
    "simulate",
    "spectral_radius",
    "static_gain",
    "static_loop_matrix",
    "trajectory_to_csv",
    "validate_structure",
]
