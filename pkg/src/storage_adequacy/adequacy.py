"""Adequacy metrics: EEU, LOLE, the firm-capacity derivative and EFC.

Expectations are taken over an explicit :class:`ScenarioSet`. Scenario
work can be spread over threads; results are always summed in scenario
index order so the aggregate does not depend on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lrtf import SimulationResult, greedy_lrtf_simulate, lole_of_set
from .model import (
    DemandTrace,
    Fleet,
    ScenarioSet,
    Store,
    as_scenarios,
    demand_profile,
    storage_profile,
)


class UndefinedMetricError(ValueError):
    pass


def _map_scenarios(fn, scenarios: ScenarioSet, parallel: int = 1) -> list:
    if parallel <= 1 or len(scenarios) == 1:
        return [fn(tr) for tr in scenarios.traces]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(fn, scenarios.traces))


def _expect(values, probabilities) -> float:
    total = 0.0
    for v, p in zip(values, probabilities):
        total += p * v
    return float(total)


@dataclass(frozen=True)
class ScenarioMetrics:
    eeu: float
    lole_sne: float
    s_e: tuple[str, ...]
    s_ne: tuple[str, ...]
    t_prime: float


@dataclass(frozen=True)
class AdequacyReport:
    eeu: float
    lole_sne: float
    eeu_derivative: float
    scenarios: list[ScenarioMetrics] = field(default_factory=list)


@dataclass(frozen=True)
class EfcResult:
    efc: float
    delta_eeu: float
    lole_sne: float


def _scenario_metrics(fleet: Fleet, trace: DemandTrace, firm_capacity: float) -> ScenarioMetrics:
    sim = greedy_lrtf_simulate(fleet, trace, firm_capacity)
    return ScenarioMetrics(
        eeu=sim.unserved_energy,
        lole_sne=lole_of_set(fleet.subset(sim.s_ne), trace),
        s_e=sim.s_e,
        s_ne=sim.s_ne,
        t_prime=sim.t_prime,
    )


def simulate_scenarios(
    fleet: Fleet, scenarios: ScenarioSet | DemandTrace, firm_capacity: float = 0.0, parallel: int = 1
) -> list[SimulationResult]:
    scenarios = as_scenarios(scenarios)
    return _map_scenarios(lambda tr: greedy_lrtf_simulate(fleet, tr, firm_capacity), scenarios, parallel)


def eeu(fleet: Fleet, scenarios: ScenarioSet | DemandTrace, firm_capacity: float = 0.0, parallel: int = 1) -> float:
    """Minimised expected energy unserved (MWh), attained by greedy LRTF."""
    scenarios = as_scenarios(scenarios)
    sims = simulate_scenarios(fleet, scenarios, firm_capacity, parallel)
    return _expect([s.unserved_energy for s in sims], scenarios.probabilities)


def adequacy_report(
    fleet: Fleet, scenarios: ScenarioSet | DemandTrace, firm_capacity: float = 0.0, parallel: int = 1
) -> AdequacyReport:
    scenarios = as_scenarios(scenarios)
    per = _map_scenarios(lambda tr: _scenario_metrics(fleet, tr, firm_capacity), scenarios, parallel)
    probs = scenarios.probabilities
    lole = _expect([s.lole_sne for s in per], probs)
    return AdequacyReport(
        eeu=_expect([s.eeu for s in per], probs),
        lole_sne=lole,
        eeu_derivative=-lole,
        scenarios=per,
    )


def eeu_derivative(fleet: Fleet, scenarios: ScenarioSet | DemandTrace, parallel: int = 1) -> float:
    """Right derivative of EEU with respect to added firm capacity, at zero.

    Equals minus the expected loss-of-load duration of the stores that do
    not empty strictly before the last shortfall instant.
    """
    return adequacy_report(fleet, scenarios, parallel=parallel).eeu_derivative


def efc_marginal(
    fleet: Fleet, candidate: Store, scenarios: ScenarioSet | DemandTrace, parallel: int = 1
) -> EfcResult:
    """Equivalent firm capacity of a small store added to ``fleet``.

    The EEU reduction from adding ``candidate`` is divided by the expected
    LOLE of the non-emptying subset of the fleet *without* the candidate.
    Only meaningful when the candidate is small relative to the fleet and
    the demand.
    """
    scenarios = as_scenarios(scenarios)
    base = adequacy_report(fleet, scenarios, parallel=parallel)
    if base.lole_sne <= 0:
        raise UndefinedMetricError("system never at loss of load; EFC undefined")
    with_candidate = eeu(fleet.with_store(candidate), scenarios, parallel=parallel)
    delta = base.eeu - with_candidate
    return EfcResult(efc=delta / base.lole_sne, delta_eeu=delta, lole_sne=base.lole_sne)


@dataclass(frozen=True)
class FeasibilityResult:
    """Comparison of cumulative storage and demand profiles.

    ``times`` are the merged breakpoints on [0, T]; the cumulative curves
    are exact there and linear in between.
    """

    feasible: bool
    first_violation: float | None
    max_deficit: float
    max_deficit_at: float
    times: np.ndarray
    cum_storage: np.ndarray
    cum_demand: np.ndarray


def feasible_by_profile(fleet: Fleet, demand: DemandTrace) -> FeasibilityResult:
    """Can the fleet meet the whole trace?

    True iff the integral of the storage profile dominates that of the load
    duration curve on every [0, t] within the horizon.
    """
    s_prof = storage_profile(fleet)
    d_prof = demand_profile(demand)
    horizon = demand.grid.horizon
    times = np.union1d(s_prof.breakpoints, d_prof.breakpoints)
    times = np.union1d(times[times <= horizon], [0.0, horizon])
    cum_s = s_prof.cumulative(times)
    cum_d = d_prof.cumulative(times)
    gap = cum_d - cum_s
    tol = 1e-9 * max(1.0, demand.energy)
    bad = np.flatnonzero(gap > tol)
    worst = int(np.argmax(gap))
    if len(bad) == 0:
        return FeasibilityResult(True, None, max(0.0, float(gap[worst])), float(times[worst]), times, cum_s, cum_d)

    j = bad[0]
    # gap is linear between breakpoints; locate where it leaves zero
    t0, t1, g0, g1 = times[j - 1], times[j], gap[j - 1], gap[j]
    if g0 >= -tol:
        first = float(t0)
    else:
        first = float(t0 + (t1 - t0) * (-g0) / (g1 - g0))
    return FeasibilityResult(False, first, float(gap[worst]), float(times[worst]), times, cum_s, cum_d)
