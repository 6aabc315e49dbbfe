"""carpnet: cascading risk-network simulation, fitting, and analysis.

Risks form a network and flip between passive and active month by month;
activation pressure comes from a risk's own likelihood and from its
active neighbors, recovery from a third process.  The package fits the
three global exponents from historical state matrices, simulates
cascades with reproducible parallel RNG streams, solves the mean-field
steady state, quantifies risk-on-risk influence via knockouts, and runs
a validation battery (parameter recovery, forward error, network effect,
sensitivity).
"""

from .dynamics import (
    ActivityStatistics,
    CascadeBatch,
    ModelParams,
    NetworkState,
    ProcessProbabilities,
    Trajectory,
    TransitionCause,
    activation_probability,
    activity_statistics,
    default_checkpoints,
    event_intensities,
    process_probabilities,
    run_cascades,
    run_cascades_parallel,
    simulate_trajectory,
    statistics_from_batch,
    step,
    trajectory_from_batch,
)
from .errors import (
    CarpError,
    ConvergenceError,
    DataError,
    ImpossibleHistoryError,
    NumericalError,
    UsageError,
)
from .graph_stats import NetworkProperties, compute_properties, to_networkx
from .influence import (
    CategoryInfluence,
    InfluenceMatrix,
    TransitionFractions,
    category_influence,
    external_fraction,
    risk_influence,
    transition_fractions,
)
from .likelihood import (
    FitConfig,
    FitResult,
    TransitionSummary,
    fit,
    log_likelihood,
    transition_log_prob,
)
from .risks import (
    CATEGORIES,
    CrossYearReport,
    ExpertPairCount,
    HistoryMatrix,
    MappingRow,
    Risk,
    RiskNetwork,
    build_history,
    build_network,
    bundled_mapping,
    load_history,
    load_mapping,
    load_network,
    load_pairs,
    load_risks,
    map_cross_year,
    month_sequence,
    normalize_likelihood,
    save_history,
    save_network,
)
from .rng import derive_rng
from .steady_state import SteadyState, fixed_point_map, solve_steady_state
from .validation import (
    AttributionFractions,
    ForwardReport,
    NetworkEffectReport,
    ReplicateRecord,
    SensitivityReport,
    ValidationReport,
    activation_rate,
    forward_error_bounds,
    forward_statistics,
    ks_distance,
    network_effect_comparison,
    recovery_experiment,
    sensitivity_suite,
    step_activation_counts,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
