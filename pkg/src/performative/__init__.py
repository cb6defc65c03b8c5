"""Optimization when deploying a model changes the data it is scored on."""

from .bandit import (
    ArmGrid,
    BanditRun,
    ConfidenceParams,
    Deployment,
    brute_force_po,
    performative_lcb,
    performative_ucb,
    successive_elimination,
    uniform_random_baseline,
)
from .benchmark import (
    ScalarQuadratic,
    deployments_to_accuracy,
    fit_power_law_exponent,
    greedy_paths,
    lazy_error_curve,
    lazy_error_recursion,
    lazy_stage_sizes,
)
from .collective import (
    SignalPlan,
    TabularPopulation,
    bayes_firm,
    mixture,
    random_plan,
    random_population,
    revenue_uplift,
    signal_density,
    success_curve,
    success_lower_bound,
    success_probability,
)
from .core import (
    Batch,
    DataPoint,
    ParamSpace,
    PREstimate,
    RegularityConstants,
    SteeringDecomposition,
    estimate_sensitivity,
    performative_risk,
    risk,
    seed_streams,
    steering_decomposition,
    wasserstein1_1d,
)
from .losses import DataDomain, LogisticLoss, QuadraticLoss, certify_constants, loss_from_spec
from .maps import (
    Certificates,
    GaussianMixtureMeanShiftMap,
    LocationScaleMap,
    OutcomePerformativityMap,
    ScalarResponse,
    StrategicResponseMap,
    equilibrium_certificates,
    map_from_spec,
    mixture_dominance_gap,
    response_from_spec,
    scalar_location_map,
)
from .power import (
    Action,
    Platform,
    causal_effect_of_position,
    decomposition_check,
    demote_focal,
    performative_power_lower_bound,
    power_report,
    probe_effect,
    steering_gap,
    swap_action,
    traffic_steering_calculator,
    viewer_subset,
)
from .solvers import (
    ConvergenceError,
    DivergenceError,
    SolverConfig,
    gms_fixed_point,
    rgd,
    rrm,
    sgd_greedy,
    sgd_lazy,
    theorem2_bound,
    theorem2_stepsize,
    zeroth_order_pr,
)
from .trace import Trace, canonical_json, config_digest, read_trace_csv

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ArmGrid",
    "BanditRun",
    "Batch",
    "Certificates",
    "ConfidenceParams",
    "ConvergenceError",
    "DataDomain",
    "DataPoint",
    "Deployment",
    "DivergenceError",
    "GaussianMixtureMeanShiftMap",
    "LocationScaleMap",
    "LogisticLoss",
    "OutcomePerformativityMap",
    "ParamSpace",
    "PREstimate",
    "Platform",
    "QuadraticLoss",
    "RegularityConstants",
    "ScalarQuadratic",
    "ScalarResponse",
    "SignalPlan",
    "SolverConfig",
    "SteeringDecomposition",
    "StrategicResponseMap",
    "TabularPopulation",
    "Trace",
    "bayes_firm",
    "brute_force_po",
    "canonical_json",
    "causal_effect_of_position",
    "certify_constants",
    "config_digest",
    "decomposition_check",
    "demote_focal",
    "deployments_to_accuracy",
    "equilibrium_certificates",
    "estimate_sensitivity",
    "fit_power_law_exponent",
    "gms_fixed_point",
    "greedy_paths",
    "lazy_error_curve",
    "lazy_error_recursion",
    "lazy_stage_sizes",
    "loss_from_spec",
    "map_from_spec",
    "mixture",
    "mixture_dominance_gap",
    "performative_lcb",
    "performative_power_lower_bound",
    "performative_risk",
    "performative_ucb",
    "power_report",
    "probe_effect",
    "random_plan",
    "random_population",
    "read_trace_csv",
    "response_from_spec",
    "revenue_uplift",
    "rgd",
    "risk",
    "rrm",
    "scalar_location_map",
    "seed_streams",
    "sgd_greedy",
    "sgd_lazy",
    "signal_density",
    "steering_decomposition",
    "steering_gap",
    "success_curve",
    "success_lower_bound",
    "success_probability",
    "successive_elimination",
    "swap_action",
    "theorem2_bound",
    "theorem2_stepsize",
    "traffic_steering_calculator",
    "uniform_random_baseline",
    "viewer_subset",
    "wasserstein1_1d",
    "zeroth_order_pr",
]
