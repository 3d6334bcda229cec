"""Longest-residual-time-first (LRTF) dispatch.

The simulator is event driven: within each step demand is constant, so
the LRTF allocation only changes when a store empties or when two groups
of stores reach the same residual time. Steps are split at those
instants, which makes the output exact for piecewise-constant demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import (
    DemandTrace,
    DispatchSchedule,
    Fleet,
    REL_TOL,
    tol_energy,
    tol_rate,
)

TIE_TOL = 1e-9


class InfeasibleTargetError(ValueError):
    """Requested rate exceeds the power of the non-empty stores."""

    def __init__(self, target: float, available: float):
        self.target = target
        self.available = available
        self.shortfall = target - available
        super().__init__(
            f"target rate {target:.6g} MW exceeds available power {available:.6g} MW "
            f"(shortfall {self.shortfall:.6g} MW)"
        )


@dataclass(frozen=True)
class FleetState:
    """Remaining energy (MWh) of each store at some instant."""

    remaining: np.ndarray

    @classmethod
    def full(cls, fleet: Fleet) -> "FleetState":
        return cls(fleet.energies)

    def active(self, fleet: Fleet) -> np.ndarray:
        return (fleet.powers > 0) & (self.remaining > tol_energy(fleet.energies))

    def residual_time(self, fleet: Fleet) -> np.ndarray:
        powers = fleet.powers
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(powers > 0, self.remaining / powers, 0.0)
        return np.where(self.active(fleet), tau, 0.0)


def _tie_groups(tau: np.ndarray, active: np.ndarray) -> list[np.ndarray]:
    """Active stores grouped by equal residual time, longest first."""
    idx = np.flatnonzero(active)
    idx = idx[np.argsort(-tau[idx], kind="stable")]
    groups: list[list[int]] = []
    for i in idx:
        if groups:
            lead = tau[groups[-1][0]]
            if lead - tau[i] <= TIE_TOL * max(1.0, lead):
                groups[-1].append(i)
                continue
        groups.append([i])
    return [np.array(g) for g in groups]


def _fill(groups: list[np.ndarray], powers: np.ndarray, target: float) -> np.ndarray:
    """Fraction of full power per group: whole groups first, the last one partially."""
    fractions = np.zeros(len(groups))
    served = 0.0
    for k, g in enumerate(groups):
        if served >= target:
            break
        pg = powers[g].sum()
        if served + pg <= target * (1 + 1e-12):
            fractions[k] = 1.0
            served += pg
        else:
            fractions[k] = (target - served) / pg
            break
    return fractions


def lrtf_allocate_step(state: FleetState, fleet: Fleet, target_rate: float) -> np.ndarray:
    """Per-store rates (MW) that deliver ``target_rate`` under LRTF priority.

    Stores with equal residual time form a group; groups are used at full
    power in descending residual-time order and the last group needed runs
    at a common fraction of full power.
    """
    powers = fleet.powers
    active = state.active(fleet)
    available = powers[active].sum()
    if target_rate > available + tol_rate(available):
        raise InfeasibleTargetError(target_rate, available)
    target_rate = min(max(target_rate, 0.0), available)
    groups = _tie_groups(state.residual_time(fleet), active)
    rates = np.zeros(len(fleet))
    for g, frac in zip(groups, _fill(groups, powers, target_rate)):
        rates[g] = frac * powers[g]
    return rates


# An allocation rule maps (residual times, powers, active mask, target) to
# per-store fractions of full power and the time until the rule must be
# re-evaluated.
AllocationRule = Callable[[np.ndarray, np.ndarray, np.ndarray, float], tuple[np.ndarray, float]]


def lrtf_rule(tau, powers, active, target):
    groups = _tie_groups(tau, active)
    # keep tied stores exactly tied so they keep moving together
    for g in groups:
        if len(g) > 1:
            tau[g] = tau[g].min()
    fractions = _fill(groups, powers, target)
    phi = np.zeros(len(tau))
    next_event = np.inf
    for k, (g, frac) in enumerate(zip(groups, fractions)):
        phi[g] = frac
        if frac > 0:
            next_event = min(next_event, tau[g[0]] / frac)
        if k + 1 < len(groups) and frac > fractions[k + 1]:
            gap = tau[g[0]] - tau[groups[k + 1][0]]
            next_event = min(next_event, gap / (frac - fractions[k + 1]))
    return phi, next_event


def priority_rule(order: Sequence[int]) -> AllocationRule:
    """Strict priority: earlier stores in ``order`` are always used first."""
    order = list(order)

    def rule(tau, powers, active, target):
        phi = np.zeros(len(tau))
        served = 0.0
        next_event = np.inf
        for i in order:
            if not active[i] or served >= target:
                continue
            take = min(powers[i], target - served)
            phi[i] = take / powers[i]
            served += take
            next_event = min(next_event, tau[i] / phi[i])
        return phi, next_event

    return rule


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of serving a trace as far as possible under an allocation rule.

    ``remaining`` holds store energies at every step boundary, shape
    (n_stores, n_steps + 1). ``empty_times`` is inf for stores that never
    empty and 0 for stores that start empty.
    """

    fleet: Fleet
    schedule: DispatchSchedule
    remaining: np.ndarray
    empty_times: np.ndarray
    t_prime: float
    s_e: tuple[str, ...]
    s_ne: tuple[str, ...]

    @property
    def residual(self) -> np.ndarray:
        return np.clip(self.schedule.residual, 0.0, None)

    @property
    def unserved_energy(self) -> float:
        return self.schedule.unserved_energy

    @property
    def served_energy(self) -> float:
        """Energy delivered by stores and firm capacity together."""
        return float(self.schedule.grid.step * (self.schedule.total_rate + self.schedule.firm).sum())

    @property
    def store_energy_served(self) -> float:
        return float(self.schedule.store_energy.sum())

    @property
    def stranded_energy(self) -> float:
        """Energy still held in the stores at the end of the horizon."""
        return float(self.remaining[:, -1].sum())

    def residual_times(self) -> np.ndarray:
        powers = self.fleet.powers[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(powers > 0, self.remaining / powers, 0.0)


def _simulate(fleet: Fleet, demand: DemandTrace, firm_capacity: float, rule: AllocationRule) -> SimulationResult:
    n, m, dt_step = len(fleet), demand.grid.n_steps, demand.grid.step
    powers, energies = fleet.powers, fleet.energies
    e_tol = tol_energy(energies)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(powers > 0, energies / powers, 0.0)
    active = (powers > 0) & (energies > e_tol)
    tau[~active] = 0.0
    empty_times = np.where(energies > e_tol, np.inf, 0.0)

    rates = np.zeros((n, m))
    firm = np.minimum(demand.values, firm_capacity)
    remaining = np.zeros((n, m + 1))
    remaining[:, 0] = np.where(active, energies, np.where(powers > 0, 0.0, energies))
    t_prime = 0.0
    time_tol = REL_TOL * max(1.0, demand.grid.horizon)

    for t in range(m):
        start = t * dt_step
        need = demand.values[t] - firm[t]
        shortfall_tol = tol_rate(demand.values[t])
        drawn = np.zeros(n)
        elapsed = 0.0
        for _ in range(10 * n + 100):
            left = dt_step - elapsed
            if left <= time_tol * 1e-3:
                break
            available = powers[active].sum()
            target = min(need, available)
            if target <= 0 or not active.any():
                if need - target > shortfall_tol:
                    t_prime = start + dt_step
                break
            phi, next_event = rule(tau, powers, active, target)
            dt = min(left, max(next_event, 0.0))
            tau[active] -= phi[active] * dt
            drawn += phi * powers * dt
            elapsed += dt
            if need - target > shortfall_tol:
                t_prime = start + elapsed
            emptied = active & (tau * powers <= e_tol)
            if emptied.any():
                tau[emptied] = 0.0
                active &= ~emptied
                empty_times[emptied] = start + elapsed
        else:
            raise RuntimeError(f"event loop did not converge in step {t}")
        rates[:, t] = drawn / dt_step
        remaining[:, t + 1] = np.where(powers > 0, np.maximum(tau * powers, 0.0), energies)

    cutoff = t_prime - time_tol
    in_e = empty_times < cutoff
    ids = fleet.ids
    schedule = DispatchSchedule(fleet, demand.grid, rates, demand.values, firm)
    return SimulationResult(
        fleet=fleet,
        schedule=schedule,
        remaining=remaining,
        empty_times=empty_times,
        t_prime=t_prime,
        s_e=tuple(i for i, e in zip(ids, in_e) if e),
        s_ne=tuple(i for i, e in zip(ids, in_e) if not e),
    )


def greedy_lrtf_simulate(fleet: Fleet, demand: DemandTrace, firm_capacity: float = 0.0) -> SimulationResult:
    """Serve as much demand as possible at every instant, prioritising by LRTF.

    Firm capacity is used first (it never runs out, so it always has the
    longest residual time). ``t_prime`` is the end of the last interval in
    which demand exceeds the available power. Stores that empty strictly
    before ``t_prime`` form ``s_e``; a store emptying exactly at
    ``t_prime`` goes to ``s_ne``.
    """
    if firm_capacity < 0:
        raise ValueError("firm capacity must be >= 0")
    return _simulate(fleet, demand, float(firm_capacity), lrtf_rule)


def priority_simulate(fleet: Fleet, demand: DemandTrace, order: Sequence[int] | None = None) -> SimulationResult:
    """Greedy dispatch with a fixed store priority order (default: fleet order).

    This is the strict-priority heuristic that LRTF improves on; it is not
    EEU-optimal in general.
    """
    if order is None:
        order = range(len(fleet))
    return _simulate(fleet, demand, 0.0, priority_rule(order))


def lole_of_set(fleet_subset: Fleet, demand: DemandTrace) -> float:
    """Hours in which demand strictly exceeds the subset's total power."""
    cap = float(fleet_subset.powers.sum())
    short = demand.values - cap > tol_rate(cap)
    return float(demand.grid.step * short.sum())
