"""Observer-based LQ-optimal consensus for discrete-time multi-agent systems.

Build the stacked error/state systems for a directed communication graph,
solve the associated Riccati equations, synthesize distributed observer
gains by spectral-norm minimization, simulate the closed loops and certify
the cost-optimality gap.
"""

from .backend import backend_name
from .costs import (
    CostBreakdown,
    CostDiffMatrices,
    TailNotConverged,
    cost_difference_matrices,
    decay_certificate,
    delta_j_series,
    evaluate_cost,
    verify_cost_identity,
)
from .graph import (
    DirectedGraph,
    LaplacianMatrix,
    build_laplacian,
    is_strongly_connected,
    laplacian_spectrum,
    neighbor_sets,
)
from .observers import (
    ObserverGains,
    SynthesisNonConvergence,
    SynthesisOptions,
    SynthesisReport,
    assemble_A_c,
    assemble_A_ec,
    joint_closed_loop,
    lmi_feasible,
    minimize_spectral_norm,
    synthesize_gains,
)
from .riccati import (
    DareProblem,
    DareSolution,
    IllConditionedGain,
    IndefiniteIterate,
    NonConvergence,
    agent_gain_blocks,
    closed_loop,
    feedback_gain,
    slice_agent_gain,
    solve_dare,
    spectral_radius,
)
from .simulate import (
    METHODS,
    BaselineDesignError,
    ConsensusMetrics,
    SimulationConfig,
    Trajectory,
    consensus_metrics,
    design_baseline_gain,
    simulate_centralized,
    simulate_distributed_error,
    simulate_distributed_state,
    simulate_traditional,
    traditional_error_matrix,
)
from .systems import (
    AgentDynamics,
    CostWeights,
    EdgeLedger,
    GlobalErrorSystem,
    GlobalStateSystem,
    build_error_system,
    build_ledger,
    build_state_system,
    error_cost_equivalence_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
