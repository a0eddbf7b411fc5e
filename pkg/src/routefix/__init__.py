"""Trade-off search and constraint-relaxation diagnosis for infeasible routing models."""

from .instances import (
    ConstraintSpec,
    Family,
    Node,
    ProblemInstance,
    VariantDescriptor,
    VARIANT_NAMES,
    build_variant,
    distance_matrix,
    load_bundled_base,
    parse_solomon,
    resolve_variant_name,
    scale_time_windows,
    truncate,
)
from .evaluation import (
    Evaluator,
    ObjectiveVector,
    RoutePlan,
    crowding_distance,
    dominates,
    evaluate,
    non_dominated_sort,
    route_cost,
)
from .solver import (
    Archive,
    OperatorStats,
    Population,
    RunResult,
    SolverConfig,
    destroy_random,
    destroy_string,
    initialize_population,
    population_update,
    repair_greedy,
    run,
    run_baseline,
    select_destroy_operator,
    spls_step,
)
from .diagnosis import (
    Adjustment,
    DiagnosisConfig,
    SuggestionReport,
    aggregate,
    apply_adjustments,
    diagnose_dcr,
    diagnose_ecp,
    render_text,
)
from .metrics import (
    MetricReport,
    NormalizationBounds,
    asr,
    build_reference_set,
    hypervolume_2d,
    igd,
    normalize,
)
from .llm_bridge import ChatClientConfig, ParseOutcome, parse_description, rephrase

__version__ = "0.1.0"

__all__ = [
    "Adjustment", "Archive", "ChatClientConfig", "ConstraintSpec", "DiagnosisConfig",
    "Evaluator", "Family", "MetricReport", "Node", "NormalizationBounds",
    "ObjectiveVector", "OperatorStats", "ParseOutcome", "Population", "ProblemInstance",
    "RoutePlan", "RunResult", "SolverConfig", "SuggestionReport", "VariantDescriptor",
    "VARIANT_NAMES", "aggregate", "apply_adjustments", "asr", "build_reference_set",
    "build_variant", "crowding_distance", "destroy_random", "destroy_string",
    "diagnose_dcr", "diagnose_ecp", "distance_matrix", "dominates", "evaluate",
    "hypervolume_2d", "igd", "initialize_population", "load_bundled_base",
    "non_dominated_sort", "normalize", "parse_description", "parse_solomon",
    "population_update", "render_text", "repair_greedy", "rephrase",
    "resolve_variant_name", "route_cost", "run", "run_baseline",
    "scale_time_windows", "select_destroy_operator", "spls_step", "truncate",
]
