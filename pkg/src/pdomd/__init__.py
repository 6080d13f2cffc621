"""Primal-dual online mirror descent under stochastic constraints."""

from .errors import (
    ConfigError,
    GeometryError,
    InfeasibleProblemError,
    MultiplierDivergenceError,
    OracleError,
    PdomdError,
    ProblemError,
    ProxConvergenceError,
    ReplayMismatchError,
)
from .geometry import (
    Box,
    BregmanGeometry,
    DecisionSet,
    EuclideanGeometry,
    NegativeEntropyGeometry,
    PushbackResult,
    Simplex,
    bregman_divergence,
    euclidean_box_step,
    exponentiated_gradient_step,
    mirror_step,
    mix_toward_uniform,
    pushback_check,
)
from .problems import (
    DatacenterConfig,
    LinearFunction,
    MeanModel,
    ObservationBatch,
    PriceTrace,
    ProblemConstants,
    ProblemInstance,
    ServiceDeficitFunction,
    SlotFunctions,
    build_datacenter_problem,
    build_synthetic_problem,
    make_linear_problem,
    pareto_sample,
    poisson_sample,
    reac_policy_step,
    service_curve,
    service_curve_inverse,
    slot_rng,
)
from .telemetry import (
    MetricsSummary,
    RunRecord,
    compute_metrics,
    divergence_radius,
    dpp_audit,
    export,
    import_record,
)
from .oracle import (
    DualPoint,
    dual_function,
    estimate_multipliers,
    hindsight_optimum,
    weak_ebc_probe,
)
from .core import (
    AlgorithmParams,
    DualState,
    SolverState,
    StepOutcome,
    assemble_dual_weighted_gradient,
    initial_state,
    iterate_run,
    parameter_schedule,
    run,
    step,
    update_equality_multiplier,
    update_inequality_multiplier,
)
from .cli import (
    ExperimentConfig,
    generate_price_trace,
    ingest_price_trace,
    parse_config,
    run_experiment,
    sweep_rates,
    write_price_trace,
)

__version__ = "0.1.0"
