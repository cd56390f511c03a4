"""avgmdp: long-run average-cost Markov decision processes at desk scale.

Exact evaluation of the eight average-cost criteria, optimal-gain
computation for finite multichain MDPs, structural verification
(one-step gain inequality, submartingale traces, reachability and
constancy), finite-horizon strategic measures, occupation-measure
linear programs, and closed-form/simulation oracles for the countable
examples.
"""

from .chains import (
    CesaroLimit,
    ClassDecomposition,
    MarkovChain,
    cesaro_matrix,
    decompose,
    expected_hitting_time,
    gth_stationary,
    hitting_probability,
    induced_chain,
)
from .countable import (
    AbsorbingChain,
    Example32Report,
    InventoryWalk,
    OccupationMeasure,
    example32_report,
    hitting_partial_sum,
    occupation_measure,
    paper_chain,
    survival_closed_form,
    walk_recurrence_probe,
)
from .criteria import (
    CriteriaReport,
    SimulationResult,
    avg_cost_markov,
    avg_cost_stationary,
    n_stage_cost,
    pathwise_exact,
    simulate_pathwise,
)
from .errors import *  # noqa: F401,F403
from .lp import (
    LpOutcome,
    LpProgram,
    TruncationStudy,
    build_lp,
    solve_lp,
    truncation_study,
    weight_scheme,
)
from .model import (
    CountableMdp,
    DriftCertificate,
    DriftReport,
    FiniteMdp,
    Policy,
    check_drift,
    classify_cost_model,
    truncate,
    uncontrolled_mdp,
    uniform_stationary,
    validate_mdp,
)
from .optimal import (
    ConnectedClassesResult,
    ConstancyReport,
    GainBiasSolution,
    ReachabilityCondition,
    check_reachability_condition,
    connected_classes,
    constancy_report,
    max_reachability,
    optimal_gain_enum,
    optimal_gain_pi,
    submartingale_check,
    verify_gain_inequality,
)
from .strategic import (
    KernelDecomposition,
    MarginalSequence,
    ReconstructionResult,
    StrategicMeasure,
    check_characterization,
    decompose_joint,
    extract_policy,
    markovize,
    propagate_marginals,
    semi_stationary_reconstruct,
    strategic_measure,
)

__version__ = "0.1.0"
