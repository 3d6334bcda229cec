"""Weighted-EEU minimisation for convex increasing cost of unserved demand.

A single store serves everything above a threshold ``k`` (up to its
power), with ``k`` as low as its energy allows. Applying that rule store by
store to the running residual demand is optimal for a known trace and any
convex increasing cost with w(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import DemandTrace, DispatchSchedule, Fleet, Store, validate_schedule


class InvalidScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class CostFunction:
    """Convex nondecreasing cost per hour of residual demand, with w(0) = 0.

    ``derivative`` is the left derivative, taken as 0 at d = 0.
    """

    kind: str
    exponent: float = 1.0
    breakpoints: tuple[float, ...] = ()
    slopes: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("linear", "power", "pwl"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "power" and not self.exponent >= 1:
            raise ValueError(f"power cost needs exponent >= 1, got {self.exponent}")
        if self.kind == "pwl":
            b, s = np.asarray(self.breakpoints, float), np.asarray(self.slopes, float)
            if len(b) == 0 or len(b) != len(s):
                raise ValueError("piecewise-linear cost needs matching breakpoints and slopes")
            if b[0] != 0 or np.any(np.diff(b) <= 0):
                raise ValueError("breakpoints must start at 0 and increase strictly")
            if np.any(s < 0) or np.any(np.diff(s) < 0):
                raise ValueError("slopes must be nonnegative and nondecreasing (convexity)")

    @classmethod
    def linear(cls) -> "CostFunction":
        return cls("linear")

    @classmethod
    def power(cls, p: float) -> "CostFunction":
        return cls("power", exponent=float(p))

    @classmethod
    def piecewise_linear(cls, breakpoints: Sequence[float], slopes: Sequence[float]) -> "CostFunction":
        return cls("pwl", breakpoints=tuple(map(float, breakpoints)), slopes=tuple(map(float, slopes)))

    @classmethod
    def parse(cls, text: str) -> "CostFunction":
        """Parse ``linear``, ``power:<p>`` or ``pwl:<file>``.

        A pwl file holds one ``breakpoint,slope`` pair per line; each slope
        applies from its breakpoint up to the next.
        """
        if text == "linear":
            return cls.linear()
        kind, _, arg = text.partition(":")
        if kind == "power" and arg:
            return cls.power(float(arg))
        if kind == "pwl" and arg:
            rows = []
            for line in Path(arg).read_text().splitlines():
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("breakpoint"):
                    continue
                b, s = line.split(",")
                rows.append((float(b), float(s)))
            return cls.piecewise_linear([r[0] for r in rows], [r[1] for r in rows])
        raise ValueError(f"cannot parse cost {text!r}; use linear, power:<p> or pwl:<file>")

    @property
    def is_linear(self) -> bool:
        if self.kind == "power":
            return self.exponent == 1
        if self.kind == "pwl":
            return len(set(self.slopes)) == 1
        return True

    def __call__(self, d):
        d = np.maximum(np.asarray(d, dtype=float), 0.0)
        if self.kind == "linear":
            return d
        if self.kind == "power":
            return d**self.exponent
        b = np.asarray(self.breakpoints)
        s = np.asarray(self.slopes)
        widths = np.append(np.diff(b), np.inf)
        covered = np.clip(d[..., None] - b, 0.0, widths)
        return covered @ s

    def derivative(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == "linear":
            out = np.ones_like(d)
        elif self.kind == "power":
            out = self.exponent * np.maximum(d, 0.0) ** (self.exponent - 1)
        else:
            # left derivative: slope of the segment ending at d
            idx = np.searchsorted(np.asarray(self.breakpoints), d, side="left") - 1
            out = np.asarray(self.slopes)[np.clip(idx, 0, None)]
        return np.where(d > 0, out, 0.0)


def clipped_excess(demand_level, power: float, threshold: float):
    """Portion of demand above ``threshold`` that a store of ``power`` can serve."""
    return np.clip(np.asarray(demand_level, dtype=float) - threshold, 0.0, power)


def clipped_residual(demand_level, power: float, threshold: float):
    """Demand left over after :func:`clipped_excess`."""
    d = np.asarray(demand_level, dtype=float)
    return d - clipped_excess(d, power, threshold)


def _served_energy(values: np.ndarray, step: float, power: float, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return step * np.clip(values - k[..., None], 0.0, power).sum(axis=-1)


def min_feasible_threshold(store: Store, residual_demand: DemandTrace) -> float:
    """Smallest k >= 0 such that serving everything above k fits in the store's energy.

    Served energy is piecewise linear and nonincreasing in k with kinks at
    d(t) and d(t) - P, so the piece where it crosses the energy limit is
    found among the kinks and then solved exactly.
    """
    values, step = residual_demand.values, residual_demand.grid.step
    if store.power <= 0:
        return 0.0
    cap = store.energy
    if _served_energy(values, step, store.power, 0.0) <= cap * (1 + 1e-12):
        return 0.0
    kinks = np.unique(np.concatenate([[0.0], values, values - store.power]))
    kinks = kinks[kinks >= 0]
    served = _served_energy(values, step, store.power, kinks)
    # served is nonincreasing; first kink where it drops to cap or below
    hi = int(np.argmax(served <= cap))
    lo = hi - 1
    k0, k1, s0, s1 = kinks[lo], kinks[hi], served[lo], served[hi]
    k = k0 + (k1 - k0) * (s0 - cap) / (s0 - s1)
    # the clip makes the solve exact on the active piece; one correction
    # pass absorbs rounding in the interpolation
    slope = step * np.count_nonzero((values - k > 0) & (values - k < store.power))
    excess = _served_energy(values, step, store.power, k) - cap
    if slope > 0 and excess > 0:
        k += excess / slope
    return float(min(max(k, k0), k1))


@dataclass(frozen=True)
class ThresholdCertificate:
    """Optimality certificate for the sequential threshold schedule.

    ``composite_levels[i]`` is the final residual demand wherever store
    i's own residual sits exactly at its threshold; ``multipliers`` are the
    cost's left derivatives there and ``step_multipliers`` the derivative
    at the final residual of each step.
    """

    order: tuple[str, ...]
    thresholds: np.ndarray
    composite_levels: np.ndarray
    multipliers: np.ndarray
    final_residual: np.ndarray
    step_multipliers: np.ndarray
    energy_used: np.ndarray


def sequential_threshold_schedule(
    fleet: Fleet, demand: DemandTrace, w: CostFunction | None = None
) -> tuple[DispatchSchedule, ThresholdCertificate]:
    """Optimal schedule for a known trace under any convex increasing cost.

    Stores are taken in fleet order; each serves demand above its lowest
    feasible threshold on the residual left by the stores before it. The
    per-step total is independent of the order, the per-store split is not.
    ``w`` only affects the multipliers in the certificate.
    """
    w = w or CostFunction.linear()
    step = demand.grid.step
    residual = demand.values.copy()
    n = len(fleet)
    rates = np.zeros((n, demand.grid.n_steps))
    thresholds = np.zeros(n)
    for i, store in enumerate(fleet):
        k = min_feasible_threshold(store, DemandTrace(demand.grid, residual))
        thresholds[i] = k
        rates[i] = clipped_excess(residual, store.power, k)
        residual = residual - rates[i]

    composite = thresholds.copy()
    for i in range(n - 1):
        level = thresholds[i]
        for j in range(i + 1, n):
            level = float(clipped_residual(level, fleet[j].power, thresholds[j]))
        composite[i] = level

    schedule = DispatchSchedule(fleet, demand.grid, rates, demand.values)
    cert = ThresholdCertificate(
        order=tuple(fleet.ids),
        thresholds=thresholds,
        composite_levels=composite,
        multipliers=w.derivative(composite),
        final_residual=residual,
        step_multipliers=w.derivative(residual),
        energy_used=step * rates.sum(axis=1),
    )
    return schedule, cert


def weighted_eeu(schedule: DispatchSchedule, demand: DemandTrace, w: CostFunction) -> float:
    """Cost of a schedule: the step-weighted sum of w(residual demand)."""
    violations = validate_schedule(schedule.fleet, demand, schedule)
    if violations:
        raise InvalidScheduleError("; ".join(str(v) for v in violations[:5]))
    return float(demand.grid.step * w(np.clip(schedule.residual, 0.0, None)).sum())
