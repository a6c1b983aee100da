"""Self-triggered CLF-CBF hold control.

At each update instant the controller solves a small QP for the input —
minimum-norm ``u`` subject to barrier rows (safety), a Lyapunov descent row
(progress), and box bounds — then computes how long that input may be held
with both properties provably intact, from a Lipschitz trajectory envelope
and a curvature bound on the Lyapunov value.  The simulator closes the loop
and logs margins densely enough to expose inter-sample violations, the
failure mode of fixed-period sampling this scheme removes.
"""

from .affine_system import (
    AffineSystem,
    ContractViolation,
    LipschitzEstimate,
    StateVector,
    double_integrator,
    estimate_lipschitz,
    eval_vector_field,
)
from .cli import (
    ConfigError,
    ExperimentConfig,
    build,
    emit_config,
    load_config,
    main,
)
from .certificates import (
    BarrierCertificate,
    LyapunovCertificate,
    SafetySpec,
    double_integrator_clf,
    double_integrator_safety,
    eta,
    lyapunov_value,
    validate_gain_row,
    zeta,
)
from .qp_solver import (
    DegenerateGradient,
    Infeasible,
    NumericalFailure,
    QpProblem,
    QpRow,
    QpSolution,
    StateOutsideSafeSet,
    analytic_clf_input,
    assemble,
    solve,
)
from .simulator import (
    ComparisonReport,
    ComparisonRow,
    SimConfig,
    SimTrace,
    UpdateRecord,
    compare,
    integrate_held,
    run,
    violation_intervals,
)
from .trigger import (
    NonpositiveMargin,
    TrajectoryBound,
    TriggerConfig,
    TriggerDecision,
    cbf_safe_period,
    clf_update_period,
    combine_periods,
    decide,
    trajectory_bound,
    zeta_lower_bound,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSystem",
    "BarrierCertificate",
    "ComparisonReport",
    "ComparisonRow",
    "ConfigError",
    "ContractViolation",
    "DegenerateGradient",
    "ExperimentConfig",
    "Infeasible",
    "LipschitzEstimate",
    "LyapunovCertificate",
    "NonpositiveMargin",
    "NumericalFailure",
    "QpProblem",
    "QpRow",
    "QpSolution",
    "SafetySpec",
    "SimConfig",
    "SimTrace",
    "StateOutsideSafeSet",
    "StateVector",
    "TrajectoryBound",
    "TriggerConfig",
    "TriggerDecision",
    "UpdateRecord",
    "analytic_clf_input",
    "assemble",
    "build",
    "cbf_safe_period",
    "clf_update_period",
    "combine_periods",
    "compare",
    "decide",
    "double_integrator",
    "double_integrator_clf",
    "double_integrator_safety",
    "emit_config",
    "estimate_lipschitz",
    "eta",
    "eval_vector_field",
    "integrate_held",
    "load_config",
    "lyapunov_value",
    "main",
    "run",
    "solve",
    "trajectory_bound",
    "validate_gain_row",
    "violation_intervals",
    "zeta",
    "zeta_lower_bound",
]
