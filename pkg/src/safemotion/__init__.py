"""Safe motion generation from dynamical systems inside learned barrier sets.

The library couples three pieces:

* a catalog of control-affine dynamical systems (systems),
* linear zeroing barriers and the minimally invasive input filter that keeps
  their intersection forward invariant (barriers, safety),
* incremental learning of those barriers from streamed demonstration points
  (learning),

plus a scenario simulator with trace output (scenario, traces), a
teaching-session gateway speaking a small JSON wire protocol (gateway,
server), and compiled hot kernels with a pure numpy fallback (kernels).
"""

from .barriers import (
    AdmissibleSet,
    LinearBarrier,
    Membership,
    emit_barrier_set,
    evaluate,
    feasibility_probe,
    lie_derivatives,
    load_barrier_set,
    membership,
    parse_barrier_set,
    save_barrier_set,
)
from .errors import (
    BarrierPreconditionError,
    BlowUpError,
    DegenerateFitError,
    DependentConstraintWarning,
    DimensionMismatchError,
    InfeasibleFilterError,
    ProtocolError,
    RankDeficientInputError,
    SafemotionError,
    ScenarioError,
    UndefinedBarrierError,
)
from .learning import (
    BarrierStats,
    ConstraintLearner,
    LearnerConfig,
    LearnerEvent,
    TrainingBuffer,
    fit_barrier,
    ingest,
    refine_barrier,
)
from .safety import (
    ConstraintMatrices,
    FilterResult,
    build_constraints,
    co_baseline_step,
    filter,
    qp_oracle,
    rcbf_filter,
)
from .scenario import (
    ComparisonReport,
    Scenario,
    ScenarioResult,
    SummaryMetrics,
    compare_controllers,
    load_scenario,
    run_scenario,
)
from .systems import (
    DynamicalSystem,
    IntegratorConfig,
    SedsParams,
    load_seds_params,
    make_builtin_system,
    step,
    validate_system,
)
from .traces import TraceRecord, emit_trace, parse_trace

__version__ = "0.1.0"

__all__ = [
    "AdmissibleSet", "LinearBarrier", "Membership", "emit_barrier_set", "evaluate",
    "feasibility_probe", "lie_derivatives", "load_barrier_set", "membership",
    "parse_barrier_set", "save_barrier_set",
    "BarrierPreconditionError", "BlowUpError", "DegenerateFitError",
    "DependentConstraintWarning", "DimensionMismatchError", "InfeasibleFilterError",
    "ProtocolError", "RankDeficientInputError", "SafemotionError", "ScenarioError",
    "UndefinedBarrierError",
    "BarrierStats", "ConstraintLearner", "LearnerConfig", "LearnerEvent",
    "TrainingBuffer", "fit_barrier", "ingest", "refine_barrier",
    "ConstraintMatrices", "FilterResult", "build_constraints", "co_baseline_step",
    "filter", "qp_oracle", "rcbf_filter",
    "ComparisonReport", "Scenario", "ScenarioResult", "SummaryMetrics",
    "compare_controllers", "load_scenario", "run_scenario",
    "DynamicalSystem", "IntegratorConfig", "SedsParams", "load_seds_params",
    "make_builtin_system", "step", "validate_system",
    "TraceRecord", "emit_trace", "parse_trace",
    "__version__",
]
