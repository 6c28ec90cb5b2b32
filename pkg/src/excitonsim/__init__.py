"""excitonsim: excitation transport and apparent entanglement on truncated
Fock spaces of coupled-pigment networks."""

__version__ = "0.1.0"

from .hilbert import (
    DensityMatrix,
    DimensionError,
    FockVector,
    ModeDims,
    ModeOperator,
    annihilation,
    basis_state,
    creation,
    displacement,
    embed,
    identity,
    number_operator,
    partial_trace,
    purity,
    tensor,
    total_number_operator,
)
from .states import (
    SpinParam,
    TruncationError,
    coherent_truncated,
    fock,
    leveled_coherent,
    leveled_norm_sq,
    min_coherent_dim,
    spin_coherent,
)
from .dynamics import (
    ConvergenceError,
    LindbladSpec,
    Trajectory,
    decohere_number,
    decohered_dimer_state,
    exchange_unitary,
    expm_oracle,
    heisenberg_transform,
    lindblad_propagate,
    liouvillian_matrix,
)
from .entanglement import (
    ConcurrenceResult,
    ExcitationProjector,
    PrecisionLossWarning,
    ZeroWeightError,
    concurrence_from_purity,
    concurrence_pure,
    concurrence_wootters,
    evolved_leveled_state,
    leading_coefficient,
    max_concurrence,
    project_density,
    project_renormalize,
)
from .transport import (
    ConfigError,
    EfficiencyReport,
    NetworkModel,
    NetworkSpec,
    build_network,
    default_time_grid,
    efficiency_integrated,
    efficiency_peak,
    initial_state,
    pairwise_concurrence,
    propagate,
    truncation_robustness,
)

__all__ = [name for name in dir() if not name.startswith("_")]
