"""
Performative Bounds

Simulates samples and populations reacting to a deployed model, runs repeated
risk minimization, and evaluates the generalization and excess-risk bounds that
hold under performativity.

Core components:
- ConstantsProfile: Audited record of every constant a bound consumes
- run_rerm / run_rrm: Repeated (empirical) risk minimization with traces
- compute_bound: Any bound by name, as a term-decomposed BoundReport
- run_sweep: Bound decomposition over the treated share xi

Usage:
    from perfbounds import ConstantsProfile, compute_bound

    report = compute_bound("rq1-corollary", profile, T=2, m=1816, n=60147)
    print(report.total, report.terms)
"""

from .bounds import (
    BoundReport,
    TightestRound,
    compute_bound,
    cumulative_bound,
    excess_risk_bound,
    excess_risk_bound_from_trace,
    fournier_term,
    gen_gap_bound_rq1,
    gen_gap_bound_rq1_from_trace,
    gen_gap_I,
    gen_gap_II,
    in_sample_shift_bound,
    in_sample_shift_bound_from_trace,
    normal_quantile,
    perf_excess_risk_bound,
    perf_excess_risk_bound_pooled,
    pooled_wald_upper,
    pooled_wald_upper_from_trace,
    radius_R,
    tightest_round,
    wald_upper,
)
from .complexity import (
    ClassSpec,
    QuadConfig,
    QuadratureError,
    covering_log_bound,
    entropy_integral_inf,
    entropy_integral_l2,
    logistic_class_spec,
)
from .domain import (
    ConstantsProfile,
    DomainBox,
    EmpiricalDistribution,
    ParamSpace,
    constants_audit,
    domain_diameter,
    empirical_from_points,
)
from .logistic import (
    ConvergenceError,
    FitConfig,
    FitResult,
    argmin_lipschitz_constant,
    empirical_risk,
    erm_fit,
    lipschitz_loss_constant,
    logistic_grad,
    logistic_loss,
    prediction_lipschitz_constant,
)
from .rerm import RermError, RermTrace, run_rerm, run_rrm
from .robust import (
    BallSpec,
    EnumerationBudgetError,
    SandwichReport,
    ball_inf_enumerate,
    ball_sup_enumerate,
    dual_lower,
    dual_phi,
    dual_upper,
    minimizing_lambda,
    sandwich_check,
)
from .sweep import SweepConfig, SweepRow, run_sweep, write_sweep_csv
from .synthetic import SyntheticConfig, gen_synthetic
from .transition import (
    BoundedFeatureShift,
    CompositeMap,
    ShiftRecord,
    TopXiLabelFlip,
    TransitionMap,
    apply_transition,
    certify_sensitivity,
    estimate_sensitivity,
    top_xi_selection,
)
from .transport import CouplingPlan, SupportCapError, kr_gap_check, shift_diameter_bound, wp_exact
from .validation import SuiteResult, run_suite

__all__ = [
    # Containers and constants
    "ConstantsProfile",
    "DomainBox",
    "EmpiricalDistribution",
    "ParamSpace",
    "constants_audit",
    "domain_diameter",
    "empirical_from_points",
    # Model
    "FitConfig",
    "FitResult",
    "ConvergenceError",
    "argmin_lipschitz_constant",
    "empirical_risk",
    "erm_fit",
    "lipschitz_loss_constant",
    "logistic_grad",
    "logistic_loss",
    "prediction_lipschitz_constant",
    # Transport
    "CouplingPlan",
    "SupportCapError",
    "kr_gap_check",
    "shift_diameter_bound",
    "wp_exact",
    # Transitions and repeated minimization
    "BoundedFeatureShift",
    "CompositeMap",
    "ShiftRecord",
    "TopXiLabelFlip",
    "TransitionMap",
    "apply_transition",
    "certify_sensitivity",
    "estimate_sensitivity",
    "top_xi_selection",
    "RermError",
    "RermTrace",
    "run_rerm",
    "run_rrm",
    # Bounds
    "BoundReport",
    "TightestRound",
    "compute_bound",
    "cumulative_bound",
    "excess_risk_bound",
    "excess_risk_bound_from_trace",
    "fournier_term",
    "gen_gap_bound_rq1",
    "gen_gap_bound_rq1_from_trace",
    "gen_gap_I",
    "gen_gap_II",
    "in_sample_shift_bound",
    "in_sample_shift_bound_from_trace",
    "normal_quantile",
    "perf_excess_risk_bound",
    "perf_excess_risk_bound_pooled",
    "pooled_wald_upper",
    "pooled_wald_upper_from_trace",
    "radius_R",
    "tightest_round",
    "wald_upper",
    # Complexity
    "ClassSpec",
    "QuadConfig",
    "QuadratureError",
    "covering_log_bound",
    "entropy_integral_inf",
    "entropy_integral_l2",
    "logistic_class_spec",
    # Robust risk
    "BallSpec",
    "EnumerationBudgetError",
    "SandwichReport",
    "ball_inf_enumerate",
    "ball_sup_enumerate",
    "dual_lower",
    "dual_phi",
    "dual_upper",
    "minimizing_lambda",
    "sandwich_check",
    # Harness
    "SuiteResult",
    "SweepConfig",
    "SweepRow",
    "SyntheticConfig",
    "gen_synthetic",
    "run_suite",
    "run_sweep",
    "write_sweep_csv",
]
