"""Domain types for non-recharging storage fleets serving a shortfall trace.

Units are fixed throughout: power in MW, energy in MWh, time in hours.
Time is a uniform grid of steps; demand and dispatch rates are constant
within a step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

REL_TOL = 1e-9


def tol_energy(energy) -> np.ndarray | float:
    return REL_TOL * np.maximum(1.0, energy)


def tol_rate(power) -> np.ndarray | float:
    return REL_TOL * np.maximum(1.0, power)


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Store:
    """A storage unit with a power limit (MW) and an energy limit (MWh)."""

    id: str
    power: float
    energy: float

    def __post_init__(self):
        for name in ("power", "energy"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"store {self.id!r}: {name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)

    @property
    def duration(self) -> float:
        """Hours the store can run at full power; 0 for an inert store."""
        return self.energy / self.power if self.power > 0 else 0.0


@dataclass(frozen=True)
class Fleet:
    """An ordered collection of stores with unique ids.

    Order matters only to the sequential threshold construction.
    """

    stores: tuple[Store, ...] = ()

    def __post_init__(self):
        stores = tuple(self.stores)
        ids = [s.id for s in stores]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate store ids in fleet: {ids}")
        object.__setattr__(self, "stores", stores)

    @classmethod
    def from_arrays(cls, powers: Sequence[float], energies: Sequence[float], ids=None) -> "Fleet":
        if len(powers) != len(energies):
            raise ValueError("powers and energies differ in length")
        if ids is None:
            ids = [f"s{i}" for i in range(len(powers))]
        return cls(tuple(Store(str(i), p, e) for i, p, e in zip(ids, powers, energies)))

    def __len__(self) -> int:
        return len(self.stores)

    def __iter__(self) -> Iterator[Store]:
        return iter(self.stores)

    def __getitem__(self, idx) -> Store:
        return self.stores[idx]

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.stores]

    @property
    def powers(self) -> np.ndarray:
        return np.array([s.power for s in self.stores], dtype=float)

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.stores], dtype=float)

    def with_store(self, store: Store) -> "Fleet":
        return Fleet(self.stores + (store,))

    def subset(self, ids: Iterable[str]) -> "Fleet":
        wanted = set(ids)
        return Fleet(tuple(s for s in self.stores if s.id in wanted))

    def reordered(self, order: Sequence[int]) -> "Fleet":
        return Fleet(tuple(self.stores[i] for i in order))

    def with_energies(self, energies: Sequence[float]) -> "Fleet":
        return Fleet(tuple(Store(s.id, s.power, max(0.0, float(e))) for s, e in zip(self.stores, energies)))


@dataclass(frozen=True)
class TimeGrid:
    step: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.step) and self.step > 0):
            raise ValueError(f"step must be positive, got {self.step}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def horizon(self) -> float:
        return self.step * self.n_steps

    @property
    def edges(self) -> np.ndarray:
        return self.step * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class DemandTrace:
    """Nonnegative shortfall demand (MW), one value per grid step."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, 1)
        if len(values) != self.grid.n_steps:
            raise ValueError(f"trace has {len(values)} values but grid has {self.grid.n_steps} steps")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("demand values must be finite and >= 0")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values: Sequence[float], step: float = 1.0) -> "DemandTrace":
        return cls(TimeGrid(step, len(values)), values)

    @property
    def energy(self) -> float:
        return float(self.grid.step * self.values.sum())


@dataclass(frozen=True)
class ScenarioSet:
    """Finite set of demand traces on a common grid, with probabilities."""

    traces: tuple[DemandTrace, ...]
    probabilities: np.ndarray

    def __post_init__(self):
        traces = tuple(self.traces)
        probs = _frozen_array(self.probabilities, 1)
        if len(traces) == 0:
            raise ValueError("scenario set is empty")
        if len(traces) != len(probs):
            raise ValueError("number of traces and probabilities differ")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities must be >= 0 and sum to 1, got sum {probs.sum()}")
        grid = traces[0].grid
        if any(tr.grid != grid for tr in traces):
            raise ValueError("all traces must share one time grid")
        object.__setattr__(self, "traces", traces)
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def uniform(cls, traces: Sequence[DemandTrace]) -> "ScenarioSet":
        n = len(traces)
        return cls(tuple(traces), np.full(n, 1.0 / n) if n else np.zeros(0))

    @classmethod
    def single(cls, trace: DemandTrace) -> "ScenarioSet":
        return cls((trace,), np.ones(1))

    @classmethod
    def from_matrix(cls, values, step: float, probabilities=None) -> "ScenarioSet":
        """Build from an array of shape (n_scenarios, n_steps)."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        grid = TimeGrid(step, values.shape[1])
        traces = tuple(DemandTrace(grid, row) for row in values)
        if probabilities is None:
            return cls.uniform(traces)
        return cls(traces, probabilities)

    @property
    def grid(self) -> TimeGrid:
        return self.traces[0].grid

    def __len__(self) -> int:
        return len(self.traces)

    def matrix(self) -> np.ndarray:
        return np.vstack([tr.values for tr in self.traces])


def as_scenarios(demand: DemandTrace | ScenarioSet) -> ScenarioSet:
    if isinstance(demand, ScenarioSet):
        return demand
    return ScenarioSet.single(demand)


@dataclass(frozen=True)
class DispatchSchedule:
    """Per-step average rates (MW) for each store, plus optional firm supply.

    ``rates`` has shape (n_stores, n_steps). ``residual`` is the demand left
    unserved at each step.
    """

    fleet: Fleet
    grid: TimeGrid
    rates: np.ndarray
    demand: np.ndarray
    firm: np.ndarray = field(default=None)

    def __post_init__(self):
        rates = _frozen_array(np.reshape(self.rates, (len(self.fleet), self.grid.n_steps)), 2)
        demand = _frozen_array(self.demand, 1)
        firm = np.zeros(self.grid.n_steps) if self.firm is None else self.firm
        firm = _frozen_array(firm, 1)
        if len(demand) != self.grid.n_steps or len(firm) != self.grid.n_steps:
            raise ValueError("demand/firm length does not match the grid")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "firm", firm)

    @property
    def total_rate(self) -> np.ndarray:
        return self.rates.sum(axis=0)

    @property
    def residual(self) -> np.ndarray:
        return self.demand - self.firm - self.total_rate

    @property
    def store_energy(self) -> np.ndarray:
        """Energy (MWh) drawn from each store over the horizon."""
        return self.grid.step * self.rates.sum(axis=1)

    @property
    def unserved_energy(self) -> float:
        return float(self.grid.step * np.clip(self.residual, 0.0, None).sum())


@dataclass(frozen=True)
class Violation:
    constraint: str  # "rate", "energy", "demand" or "residual"
    store: str | None
    step: int | None
    excess: float

    def __str__(self):
        where = []
        if self.store is not None:
            where.append(f"store={self.store}")
        if self.step is not None:
            where.append(f"step={self.step}")
        return f"{self.constraint} constraint violated ({', '.join(where)}) by {self.excess:.6g}"


def validate_schedule(fleet: Fleet, demand: DemandTrace, schedule: DispatchSchedule) -> list[Violation]:
    """Return every violation of the rate, energy and demand constraints.

    An empty list means the schedule is an admissible policy.
    """
    n, m = len(fleet), demand.grid.n_steps
    if schedule.rates.shape != (n, m):
        raise ValueError(f"schedule shape {schedule.rates.shape} does not match fleet x steps {(n, m)}")
    if schedule.grid != demand.grid:
        raise ValueError("schedule and demand are on different grids")

    rates = schedule.rates
    powers, energies = fleet.powers, fleet.energies
    out = []
    low = rates < -tol_rate(powers)[:, None]
    high = rates > (powers + tol_rate(powers))[:, None]
    for i, t in zip(*np.nonzero(low | high)):
        excess = -rates[i, t] if low[i, t] else rates[i, t] - powers[i]
        out.append(Violation("rate", fleet[i].id, int(t), float(excess)))

    used = demand.grid.step * rates.sum(axis=1)
    for i in np.nonzero(used > energies + tol_energy(energies))[0]:
        out.append(Violation("energy", fleet[i].id, None, float(used[i] - energies[i])))

    supplied = rates.sum(axis=0) + schedule.firm
    cap = demand.values + tol_rate(np.maximum(powers.sum(), demand.values))
    for t in np.nonzero(supplied > cap)[0]:
        out.append(Violation("demand", None, int(t), float(supplied[t] - demand.values[t])))
    return out


@dataclass(frozen=True)
class Profile:
    """Nonincreasing step function on [0, total_duration].

    Segment j has length ``durations[j]`` hours at ``levels[j]`` MW; the
    function is zero beyond the last segment.
    """

    durations: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        durations = _frozen_array(self.durations, 1)
        levels = _frozen_array(self.levels, 1)
        if len(durations) != len(levels):
            raise ValueError("durations and levels differ in length")
        if np.any(durations <= 0):
            raise ValueError("segment durations must be positive")
        if np.any(np.diff(levels) > 0):
            raise ValueError("profile levels must be nonincreasing")
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "levels", levels)

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment end times, starting with 0."""
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    @property
    def energy(self) -> float:
        return float(np.dot(self.durations, self.levels))

    def __call__(self, t):
        """Level at time t, right-continuous except at 0 where segments are closed."""
        t = np.asarray(t, dtype=float)
        ends = np.cumsum(self.durations)
        idx = np.searchsorted(ends, t, side="left")
        padded = np.append(self.levels, 0.0)
        return padded[np.minimum(idx, len(self.levels))]

    def cumulative(self, t):
        """Integral of the profile over [0, t]."""
        t = np.asarray(t, dtype=float)
        starts = self.breakpoints[:-1]
        covered = np.clip(t[..., None] - starts, 0.0, self.durations)
        return covered @ self.levels

    def __add__(self, other: "Profile") -> "Profile":
        bps = np.union1d(self.breakpoints, other.breakpoints)
        mids = 0.5 * (bps[:-1] + bps[1:])
        levels = self(mids) + other(mids)
        return _compact(np.diff(bps), levels)


def _compact(durations, levels) -> Profile:
    durations = np.asarray(durations, dtype=float)
    levels = np.asarray(levels, dtype=float)
    keep = durations > 0
    durations, levels = durations[keep], levels[keep]
    if len(levels) == 0:
        return Profile(np.zeros(0), np.zeros(0))
    merged_d, merged_l = [durations[0]], [levels[0]]
    for d, lv in zip(durations[1:], levels[1:]):
        if lv == merged_l[-1]:
            merged_d[-1] += d
        else:
            merged_d.append(d)
            merged_l.append(lv)
    return Profile(np.array(merged_d), np.array(merged_l))


def storage_profile(fleet: Fleet) -> Profile:
    """Total power available at elapsed time t if every store runs flat out from 0.

    Zero-power and zero-energy stores contribute nothing.
    """
    live = [s for s in fleet if s.power > 0 and s.energy > 0]
    if not live:
        return Profile(np.zeros(0), np.zeros(0))
    durs = np.array([s.duration for s in live])
    powers = np.array([s.power for s in live])
    ends = np.unique(durs)
    levels = np.array([powers[durs >= e].sum() for e in ends])
    return _compact(np.diff(np.concatenate([[0.0], ends])), levels)


def demand_profile(demand: DemandTrace) -> Profile:
    """Load duration curve: the trace rearranged into nonincreasing order.

    Zero-demand steps are kept, so the profile spans the whole horizon.
    """
    levels, counts = np.unique(demand.values, return_counts=True)
    order = np.argsort(levels)[::-1]
    return _compact(counts[order] * demand.grid.step, levels[order])
