"""Scheduling and valuation of non-recharging energy stores for capacity adequacy."""

from .adequacy import (
    AdequacyReport,
    EfcResult,
    FeasibilityResult,
    UndefinedMetricError,
    adequacy_report,
    eeu,
    eeu_derivative,
    efc_marginal,
    feasible_by_profile,
)
from .lrtf import (
    FleetState,
    InfeasibleTargetError,
    SimulationResult,
    greedy_lrtf_simulate,
    lole_of_set,
    lrtf_allocate_step,
    priority_simulate,
)
from .model import (
    DemandTrace,
    DispatchSchedule,
    Fleet,
    Profile,
    ScenarioSet,
    Store,
    TimeGrid,
    Violation,
    demand_profile,
    storage_profile,
    validate_schedule,
)
from .stochastic import (
    PolicyTrace,
    example2_instance,
    example2_monte_carlo,
    example2_objective,
    example2_optimal_rate,
    expected_value_forecaster,
    first_step_rate_search,
    persistence_forecast,
    rolling_intrinsic,
)
from .weighted import (
    CostFunction,
    InvalidScheduleError,
    ThresholdCertificate,
    clipped_excess,
    clipped_residual,
    min_feasible_threshold,
    sequential_threshold_schedule,
    weighted_eeu,
)

__version__ = "0.1.0"
