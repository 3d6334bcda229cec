"""Readers and writers for fleet configs, demand CSVs, schedules and reports.

Units are fixed: MW, MWh, hours. Floats are written with ``repr`` so
files round-trip exactly and identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import DemandTrace, DispatchSchedule, Fleet, ScenarioSet, Store, TimeGrid


class DataFormatError(ValueError):
    """Malformed input file; the message names the file and line."""


def fmt(x) -> str:
    x = float(x)
    if x == 0:
        return "0"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def read_fleet_config(path) -> tuple[Fleet, dict]:
    """Load a JSON fleet config.

    Expected shape::

        {"grid": {"step_hours": 0.5, "n_steps": 8},
         "stores": [{"id": "b1", "power_mw": 200, "energy_mwh": 500}, ...]}

    ``grid`` is optional. Returns the fleet and the grid mapping.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    stores = []
    for n, entry in enumerate(doc.get("stores", [])):
        try:
            stores.append(Store(str(entry["id"]), float(entry["power_mw"]), float(entry["energy_mwh"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: store #{n}: {exc}") from None
    try:
        fleet = Fleet(tuple(stores))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return fleet, dict(doc.get("grid", {}))


def write_fleet_config(fleet: Fleet, path, grid: TimeGrid | None = None):
    doc = {}
    if grid is not None:
        doc["grid"] = {"step_hours": grid.step, "n_steps": grid.n_steps}
    doc["stores"] = [{"id": s.id, "power_mw": s.power, "energy_mwh": s.energy} for s in fleet]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _rows(path: Path, header_prefix: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}:1: empty file") from None
        header = [h.strip() for h in header]
        if header[: len(header_prefix)] != header_prefix:
            raise DataFormatError(f"{path}:1: expected header starting {','.join(header_prefix)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, header, [c.strip() for c in row]


def _parse_numbers(path, lineno, cells) -> list[float]:
    out = []
    for c in cells:
        try:
            v = float(c)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: not a number: {c!r}") from None
        if not np.isfinite(v) or v < 0:
            raise DataFormatError(f"{path}:{lineno}: value must be finite and >= 0, got {c!r}")
        out.append(v)
    return out


def _check_index(path, lineno, cell, expected):
    try:
        idx = int(cell)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: bad step_index {cell!r}") from None
    if idx != expected:
        raise DataFormatError(f"{path}:{lineno}: step_index {idx} out of sequence, expected {expected}")


def read_demand_csv(path, step_hours: float) -> DemandTrace:
    """Read ``step_index,demand_mw`` rows, indices 0..n-1 in order."""
    path = Path(path)
    values = []
    for lineno, _, row in _rows(path, ["step_index", "demand_mw"]):
        _check_index(path, lineno, row[0], len(values))
        values.append(_parse_numbers(path, lineno, row[1:2])[0])
    if not values:
        raise DataFormatError(f"{path}: no demand rows")
    return DemandTrace(TimeGrid(step_hours, len(values)), values)


def read_scenarios_csv(path, step_hours: float) -> ScenarioSet:
    """Read ``step_index,scenario_0,scenario_1,...`` rows.

    An optional row whose first cell is ``probability`` gives the scenario
    weights; without it scenarios are equally likely.
    """
    path = Path(path)
    rows, probs = [], None
    for lineno, header, row in _rows(path, ["step_index"]):
        if len(header) < 2:
            raise DataFormatError(f"{path}:1: no scenario columns")
        if row[0] == "probability":
            probs = _parse_numbers(path, lineno, row[1:])
            if abs(sum(probs) - 1.0) > 1e-9:
                raise DataFormatError(f"{path}:{lineno}: probabilities sum to {sum(probs)}, not 1")
            continue
        _check_index(path, lineno, row[0], len(rows))
        rows.append(_parse_numbers(path, lineno, row[1:]))
    if not rows:
        raise DataFormatError(f"{path}: no demand rows")
    values = np.array(rows).T
    return ScenarioSet.from_matrix(values, step_hours, probs)


def write_demand_csv(trace: DemandTrace, path):
    lines = ["step_index,demand_mw"] + [f"{t},{fmt(v)}" for t, v in enumerate(trace.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_scenarios_csv(scenarios: ScenarioSet, path, with_probabilities: bool = True):
    values = scenarios.matrix()
    header = "step_index," + ",".join(f"scenario_{j}" for j in range(len(scenarios)))
    lines = [header]
    for t in range(values.shape[1]):
        lines.append(f"{t}," + ",".join(fmt(v) for v in values[:, t]))
    if with_probabilities:
        lines.append("probability," + ",".join(fmt(p) for p in scenarios.probabilities))
    Path(path).write_text("\n".join(lines) + "\n")


def schedule_csv(schedule: DispatchSchedule) -> str:
    """Schedule as CSV: ``step_index``, one column per store, ``firm``, ``residual``."""
    buf = io.StringIO()
    buf.write(",".join(["step_index", *schedule.fleet.ids, "firm", "residual"]) + "\n")
    residual = np.clip(schedule.residual, 0.0, None)
    for t in range(schedule.grid.n_steps):
        cells = [str(t)] + [fmt(r) for r in schedule.rates[:, t]] + [fmt(schedule.firm[t]), fmt(residual[t])]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def read_schedule_csv(path, fleet: Fleet, step_hours: float) -> DispatchSchedule:
    """Inverse of :func:`schedule_csv`; demand is rebuilt as served plus residual."""
    path = Path(path)
    expected = ["step_index", *fleet.ids, "firm", "residual"]
    rates, firm, residual = [], [], []
    for lineno, header, row in _rows(path, expected):
        _check_index(path, lineno, row[0], len(rates))
        nums = _parse_numbers(path, lineno, row[1:])
        rates.append(nums[: len(fleet)])
        firm.append(nums[len(fleet)])
        residual.append(nums[len(fleet) + 1])
    rates = np.array(rates).T.reshape(len(fleet), len(firm))
    demand = rates.sum(axis=0) + np.array(firm) + np.array(residual)
    return DispatchSchedule(fleet, TimeGrid(step_hours, len(firm)), rates, demand, np.array(firm))


def profiles_csv(times: Iterable[float], cum_storage: Iterable[float], cum_demand: Iterable[float]) -> str:
    lines = ["t_hours,cum_storage_mwh,cum_demand_mwh"]
    lines += [f"{fmt(t)},{fmt(s)},{fmt(d)}" for t, s, d in zip(times, cum_storage, cum_demand)]
    return "\n".join(lines) + "\n"


def format_report(report: dict) -> str:
    """Flat ``key=value`` block, keys in insertion order."""
    out = []
    for key, value in report.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(fmt(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in value)
        elif isinstance(value, (int, float, np.floating)) and not isinstance(value, bool):
            value = fmt(value)
        out.append(f"{key}={value}")
    return "\n".join(out) + "\n"


def write_report_json(report: dict, path):
    def clean(v):
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        if isinstance(v, (list, tuple, np.ndarray)):
            return [clean(x) for x in v]
        return v

    Path(path).write_text(json.dumps({k: clean(v) for k, v in report.items()}, indent=2, sort_keys=False) + "\n")
