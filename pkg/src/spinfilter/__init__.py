"""Conditional dynamics of continuously measured spin-1/2 ensembles.

Two measurement models of the same dispersive Jz probe are simulated side
by side: a single-mode (collective) filter whose backaction is built from
collective operators only, and a multi-mode (symmetric) filter whose
per-particle dephasing couples the total-spin multiplets.  States are kept
block-diagonal over multiplets (degeneracy-aggregated), which keeps large
ensembles cheap; a brute-force 2^N oracle validates the block engine at
small N.
"""

from .spinrep import (
    BlockLayout,
    CapacityError,
    Irrep,
    IrrepOperators,
    alpha,
    block_layout,
    degeneracy,
    irrep_operators,
)
from .gcs import (
    GcsState,
    ObservableRecord,
    block_traces,
    coherent_x,
    expectation,
    load_snapshot,
    min_block_eigenvalue,
    per_block_jy_variance,
    purity,
    random_state,
    save_snapshot,
    squeezing_parameter,
    steady_state,
    variance,
    zero_state,
)
from .dynamics import (
    EngineKind,
    EnsembleSummary,
    ModelKind,
    StepSizeError,
    SymmetricCoefficients,
    TrajectoryConfig,
    TrajectoryResult,
    binomial_final_m_probabilities,
    build_symmetric_coefficients,
    ensemble_run,
    filter_step,
    lindblad_collective,
    lindblad_symmetric,
    run_trajectory,
)
from .oracle import (
    CoupledBasis,
    GateReport,
    coupled_basis,
    equivalence_check,
    full_collective_operator,
    full_lindblad,
    generator_gate,
    project_to_gcs,
    to_full,
    validate_suite,
)

__version__ = "0.1.0"

__all__ = [
    "BlockLayout", "CapacityError", "Irrep", "IrrepOperators",
    "alpha", "block_layout", "degeneracy", "irrep_operators",
    "GcsState", "ObservableRecord", "block_traces", "coherent_x",
    "expectation", "load_snapshot", "min_block_eigenvalue",
    "per_block_jy_variance", "purity", "random_state", "save_snapshot",
    "squeezing_parameter", "steady_state", "variance", "zero_state",
    "EngineKind", "EnsembleSummary", "ModelKind", "StepSizeError",
    "SymmetricCoefficients", "TrajectoryConfig", "TrajectoryResult",
    "binomial_final_m_probabilities", "build_symmetric_coefficients",
    "ensemble_run", "filter_step", "lindblad_collective",
    "lindblad_symmetric", "run_trajectory",
    "CoupledBasis", "GateReport", "coupled_basis", "equivalence_check",
    "full_collective_operator", "full_lindblad", "generator_gate",
    "project_to_gcs", "to_full", "validate_suite",
    "__version__",
]
