"""Policies for uncertain demand.

Greedy LRTF stays optimal for plain EEU under uncertainty. For a nonlinear
cost there is no closed-form policy; this module provides the rolling
intrinsic heuristic (re-solve the deterministic problem on a point
forecast, commit the first step), a first-step search for two-stage
problems, and the closed form of a small two-period instance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .lrtf import greedy_lrtf_simulate
from .model import DemandTrace, DispatchSchedule, Fleet, ScenarioSet, Store, TimeGrid, as_scenarios
from .weighted import CostFunction, sequential_threshold_schedule, weighted_eeu

# Maps the demand realised so far (including the current step) and the
# horizon length in steps to a forecast of the remaining steps.
Forecaster = Callable[[np.ndarray, int], np.ndarray]


def persistence_forecast(past: np.ndarray, n_steps: int) -> np.ndarray:
    """Repeat the latest observed demand."""
    return np.full(n_steps - len(past), past[-1])


def expected_value_forecaster(model: ScenarioSet, match_tol: float = 1e-9) -> Forecaster:
    """Conditional mean of the scenarios consistent with the realised past.

    Falls back to the unconditional mean when no scenario matches.
    """
    values = model.matrix()
    probs = model.probabilities

    def forecast(past: np.ndarray, n_steps: int) -> np.ndarray:
        t = len(past)
        scale = match_tol * np.maximum(1.0, np.abs(past))
        match = np.all(np.abs(values[:, :t] - past) <= scale, axis=1)
        weights = probs * match if match.any() and probs[match].sum() > 0 else probs
        return weights @ values[:, t:n_steps] / weights.sum()

    return forecast


@dataclass(frozen=True)
class PolicyTrace:
    schedules: list[DispatchSchedule]
    costs: np.ndarray
    probabilities: np.ndarray

    @property
    def expected_cost(self) -> float:
        total = 0.0
        for c, p in zip(self.costs, self.probabilities):
            total += p * c
        return float(total)

    @property
    def first_step_totals(self) -> np.ndarray:
        return np.array([s.total_rate[0] for s in self.schedules])


def _first_step_rates(fleet: Fleet, trace: DemandTrace, w: CostFunction) -> np.ndarray:
    if w.is_linear:
        # every EEU-optimal plan is acceptable here; the greedy LRTF one
        # needs no forecast and stays optimal under uncertainty
        now = DemandTrace(TimeGrid(trace.grid.step, 1), trace.values[:1])
        return greedy_lrtf_simulate(fleet, now).schedule.rates[:, 0]
    schedule, _ = sequential_threshold_schedule(fleet, trace, w)
    return schedule.rates[:, 0]


def _rollout(fleet: Fleet, trace: DemandTrace, forecaster, w: CostFunction) -> DispatchSchedule:
    m, step = trace.grid.n_steps, trace.grid.step
    remaining = fleet.energies
    rates = np.zeros((len(fleet), m))
    for t in range(m):
        past = trace.values[: t + 1]
        if forecaster == "perfect":
            future = trace.values[t + 1 :]
        else:
            future = np.asarray(forecaster(past, m), dtype=float)
            if len(future) != m - t - 1:
                raise ValueError(f"forecaster returned {len(future)} values, expected {m - t - 1}")
            future = np.maximum(future, 0.0)
        horizon = DemandTrace(TimeGrid(step, m - t), np.concatenate([past[-1:], future]))
        r = _first_step_rates(fleet.with_energies(remaining), horizon, w)
        r = np.minimum(r, remaining / step)
        rates[:, t] = r
        remaining = np.maximum(remaining - r * step, 0.0)
    return DispatchSchedule(fleet, trace.grid, rates, trace.values)


def rolling_intrinsic(
    fleet: Fleet,
    scenarios: ScenarioSet | DemandTrace,
    forecaster: Union[Forecaster, str, None] = None,
    w: CostFunction | None = None,
    parallel: int = 1,
) -> PolicyTrace:
    """Re-optimise on a point forecast at every step and commit only that step.

    ``forecaster`` is a pure function of the realised past, the string
    ``"perfect"`` (uses the true future; for testing only) or None for the
    conditional mean over ``scenarios``. With a linear cost the committed
    step is the greedy LRTF one.
    """
    scenarios = as_scenarios(scenarios)
    w = w or CostFunction.linear()
    if forecaster is None:
        forecaster = expected_value_forecaster(scenarios)
    elif isinstance(forecaster, str) and forecaster != "perfect":
        raise ValueError(f"unknown forecaster {forecaster!r}")

    def run(trace):
        return _rollout(fleet, trace, forecaster, w)

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            schedules = list(pool.map(run, scenarios.traces))
    else:
        schedules = [run(tr) for tr in scenarios.traces]
    costs = np.array([weighted_eeu(s, tr, w) for s, tr in zip(schedules, scenarios.traces)])
    return PolicyTrace(schedules, costs, scenarios.probabilities)


@dataclass(frozen=True)
class FirstStepChoice:
    rate: float
    expected_cost: float


def first_step_cost(fleet: Fleet, scenarios: ScenarioSet, w: CostFunction, rate: float) -> float:
    """Expected cost of serving ``rate`` now (LRTF split), then the clairvoyant optimum.

    Exact when the remaining demand is revealed right after the first step,
    as in a two-period problem.
    """
    step = scenarios.grid.step
    first = DemandTrace(TimeGrid(step, 1), [rate])
    r0 = greedy_lrtf_simulate(fleet, first).schedule.rates[:, 0]
    rest_fleet = fleet.with_energies(fleet.energies - r0 * step)
    total = 0.0
    for trace, p in zip(scenarios.traces, scenarios.probabilities):
        cost = step * float(w(trace.values[0] - r0.sum()))
        if trace.grid.n_steps > 1:
            rest = DemandTrace(TimeGrid(step, trace.grid.n_steps - 1), trace.values[1:])
            schedule, _ = sequential_threshold_schedule(rest_fleet, rest, w)
            cost += weighted_eeu(schedule, rest, w)
        total += p * cost
    return total


def first_step_rate_search(
    fleet: Fleet, scenarios: ScenarioSet, w: CostFunction, xatol: float = 1e-8
) -> FirstStepChoice:
    """Best common first-step rate when the rest of the trace is revealed afterwards."""
    first = scenarios.matrix()[:, 0]
    if np.ptp(first) > 1e-9 * max(1.0, first.max()):
        raise ValueError("first-step demand differs across scenarios")
    upper = min(float(first[0]), float(fleet.powers[fleet.energies > 0].sum()))
    upper = min(upper, float(fleet.energies.sum() / scenarios.grid.step))
    if upper <= 0:
        return FirstStepChoice(0.0, first_step_cost(fleet, scenarios, w, 0.0))

    def cost(x):
        return first_step_cost(fleet, scenarios, w, x)

    res = minimize_scalar(cost, bounds=(0.0, upper), method="bounded", options={"xatol": xatol})
    best = min([(res.fun, float(res.x)), (cost(0.0), 0.0), (cost(upper), upper)])
    return FirstStepChoice(best[1], float(best[0]))


def _check_example2(p: float, x: float | None = None):
    if not p >= 1:
        raise ValueError(f"exponent p must be >= 1, got {p}")
    if x is not None and not 0 <= x <= 2:
        raise ValueError(f"first-period rate x must lie in [0, 2], got {x}")


def example2_objective(p: float, x: float) -> float:
    """Expected cost (2 - x)^p + (x + 2)^(p+1) / (4 (p + 1)).

    Two unit periods; a store with P = E = 2; demand 2 in the first period
    and Uniform[0, 4] in the second, revealed only at the start of period
    two; cost w(d) = d^p; x is the rate in the first period.
    """
    _check_example2(p, x)
    return (2 - x) ** p + (x + 2) ** (p + 1) / (4 * (p + 1))


def example2_objective_slope(p: float, x: float) -> float:
    _check_example2(p, x)
    return -p * (2 - x) ** (p - 1) + (x + 2) ** p / 4


def example2_optimal_rate(p: float, xtol: float = 1e-10) -> float:
    """Minimiser of :func:`example2_objective` over x in [0, 2].

    The slope is increasing in x, so the root is unique; endpoints are
    returned when the slope does not change sign.
    """
    _check_example2(p)
    if example2_objective_slope(p, 2.0) <= 0:
        return 2.0
    if example2_objective_slope(p, 0.0) >= 0:
        return 0.0
    return float(brentq(lambda x: example2_objective_slope(p, x), 0.0, 2.0, xtol=xtol))


def example2_monte_carlo(p: float, x: float, n_draws: int = 10**6, rng=None) -> tuple[float, float]:
    """Sample mean and standard error of the two-period cost over k ~ U[0, 4]."""
    _check_example2(p, x)
    rng = np.random.default_rng(rng)
    k = rng.uniform(0.0, 4.0, n_draws)
    second = np.maximum(0.0, k - (2 - x)) ** p
    cost = (2 - x) ** p + second
    return float(cost.mean()), float(cost.std(ddof=1) / np.sqrt(n_draws))


def example2_instance(n_grid: int = 401) -> tuple[Fleet, ScenarioSet]:
    """Discretised two-period instance: second-period demand on a uniform grid over [0, 4]."""
    ks = np.linspace(0.0, 4.0, n_grid)
    values = np.column_stack([np.full(n_grid, 2.0), ks])
    return Fleet((Store("store", 2.0, 2.0),)), ScenarioSet.from_matrix(values, step=1.0)
