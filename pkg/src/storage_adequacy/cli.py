"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 metric undefined for the inputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .adequacy import UndefinedMetricError, adequacy_report, efc_marginal, feasible_by_profile
from .io import (
    DataFormatError,
    format_report,
    profiles_csv,
    read_demand_csv,
    read_fleet_config,
    read_scenarios_csv,
    schedule_csv,
    write_report_json,
)
from .lrtf import greedy_lrtf_simulate
from .model import ScenarioSet, Store
from .stochastic import (
    expected_value_forecaster,
    first_step_rate_search,
    persistence_forecast,
    rolling_intrinsic,
)
from .weighted import CostFunction, sequential_threshold_schedule, weighted_eeu

EXIT_INPUT = 2
EXIT_UNDEFINED = 3


def _load(args, allow_scenarios: bool):
    fleet, grid = read_fleet_config(args.fleet)
    step = args.step_hours if args.step_hours is not None else float(grid.get("step_hours", 1.0))
    if args.demand and args.scenarios:
        raise DataFormatError("give either --demand or --scenarios, not both")
    if args.scenarios:
        if not allow_scenarios:
            raise DataFormatError(f"'{args.command}' needs a single --demand trace")
        data = read_scenarios_csv(args.scenarios, step)
    elif args.demand:
        data = read_demand_csv(args.demand, step)
    else:
        raise DataFormatError("one of --demand or --scenarios is required")
    n_steps = data.grid.n_steps
    if "n_steps" in grid and int(grid["n_steps"]) != n_steps:
        raise DataFormatError(f"{args.fleet}: grid n_steps={grid['n_steps']} but demand has {n_steps} steps")
    return fleet, data


def _scenario_set(data) -> ScenarioSet:
    return data if isinstance(data, ScenarioSet) else ScenarioSet.single(data)


def _finish(args, out, report: dict, csv_name: str | None = None, csv_text: str | None = None):
    out.write(format_report(report))
    if args.out:
        target = Path(args.out)
        target.mkdir(parents=True, exist_ok=True)
        write_report_json(report, target / "report.json")
        if csv_text is not None:
            (target / csv_name).write_text(csv_text)
    elif csv_text is not None:
        out.write("\n" + csv_text)
    return 0


def cmd_feasibility(args, out):
    fleet, demand = _load(args, allow_scenarios=False)
    res = feasible_by_profile(fleet, demand)
    report = {"status": "feasible" if res.feasible else "infeasible"}
    if not res.feasible:
        report["first_violation_h"] = res.first_violation
        report["max_deficit_mwh"] = res.max_deficit
        report["max_deficit_at_h"] = res.max_deficit_at
    return _finish(args, out, report, "profiles.csv", profiles_csv(res.times, res.cum_storage, res.cum_demand))


def cmd_dispatch(args, out):
    fleet, demand = _load(args, allow_scenarios=False)
    sim = greedy_lrtf_simulate(fleet, demand, args.firm)
    report = {
        "eeu_mwh": sim.unserved_energy,
        "served_mwh": sim.served_energy,
        "stranded_mwh": sim.stranded_energy,
        "t_prime_h": sim.t_prime,
        "s_e": list(sim.s_e),
        "s_ne": list(sim.s_ne),
    }
    return _finish(args, out, report, "schedule.csv", schedule_csv(sim.schedule))


def cmd_metrics(args, out):
    fleet, data = _load(args, allow_scenarios=True)
    rep = adequacy_report(fleet, data, args.firm, parallel=args.parallel)
    report = {
        "eeu_mwh": rep.eeu,
        "lole_sne_h": rep.lole_sne,
        "eeu_derivative_mwh_per_mw": rep.eeu_derivative,
    }
    return _finish(args, out, report)


def _parse_candidate(text: str) -> Store:
    parts = text.split(",")
    if len(parts) != 3:
        raise DataFormatError(f"--candidate expects ID,POWER_MW,ENERGY_MWH, got {text!r}")
    try:
        return Store(parts[0], float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise DataFormatError(f"--candidate: {exc}") from None


def cmd_efc(args, out):
    fleet, data = _load(args, allow_scenarios=True)
    candidate = _parse_candidate(args.candidate)
    res = efc_marginal(fleet, candidate, data, parallel=args.parallel)
    report = {
        "efc_mw": res.efc,
        "delta_eeu_mwh": res.delta_eeu,
        "lole_sne_h": res.lole_sne,
        "eeu_derivative_mwh_per_mw": -res.lole_sne,
    }
    return _finish(args, out, report)


def cmd_weighted(args, out):
    fleet, demand = _load(args, allow_scenarios=False)
    w = CostFunction.parse(args.cost)
    schedule, cert = sequential_threshold_schedule(fleet, demand, w)
    report = {
        "objective": weighted_eeu(schedule, demand, w),
        "eeu_mwh": schedule.unserved_energy,
        "order": list(cert.order),
        "thresholds_mw": list(cert.thresholds),
        "composite_levels_mw": list(cert.composite_levels),
        "multipliers": list(cert.multipliers),
        "energy_used_mwh": list(cert.energy_used),
    }
    return _finish(args, out, report, "schedule.csv", schedule_csv(schedule))


def cmd_simulate(args, out):
    fleet, data = _load(args, allow_scenarios=True)
    scenarios = _scenario_set(data)
    w = CostFunction.parse(args.cost)
    report = {"policy": args.policy}
    if args.policy == "first-step-search":
        choice = first_step_rate_search(fleet, scenarios, w)
        report["first_step_rate_mw"] = choice.rate
        report["expected_weighted_eeu"] = choice.expected_cost
        return _finish(args, out, report)

    if args.policy == "greedy":
        forecaster = "perfect"  # unused: a linear cost commits greedy LRTF steps
        w_policy = CostFunction.linear()
    else:
        forecaster = {
            "expected": expected_value_forecaster(scenarios),
            "persistence": persistence_forecast,
            "perfect": "perfect",
        }[args.forecaster]
        w_policy = w
    trace = rolling_intrinsic(fleet, scenarios, forecaster, w_policy, parallel=args.parallel)
    costs = [weighted_eeu(s, tr, w) for s, tr in zip(trace.schedules, scenarios.traces)]
    expected = 0.0
    for c, p in zip(costs, scenarios.probabilities):
        expected += p * c
    firsts = trace.first_step_totals
    report["expected_weighted_eeu"] = expected
    if np.ptp(firsts) <= 1e-9 * max(1.0, np.max(firsts)):
        report["first_step_rate_mw"] = firsts[0]
    report["scenario_weighted_eeu"] = costs
    return _finish(args, out, report)


COMMANDS = {
    "feasibility": (cmd_feasibility, "can the fleet meet the whole trace"),
    "dispatch": (cmd_dispatch, "greedy LRTF schedule and EEU"),
    "metrics": (cmd_metrics, "EEU, LOLE of the non-emptying stores, dEEU/dz"),
    "efc": (cmd_efc, "equivalent firm capacity of a marginal store"),
    "weighted": (cmd_weighted, "optimal schedule for a convex cost of unserved demand"),
    "simulate": (cmd_simulate, "evaluate a policy over demand scenarios"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storage-adequacy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--fleet", required=True, help="JSON fleet config")
        p.add_argument("--demand", help="CSV with step_index,demand_mw")
        p.add_argument("--scenarios", help="CSV with step_index,scenario_0,...")
        p.add_argument("--step-hours", type=float, default=None, help="overrides the config grid step")
        p.add_argument("--out", help="directory for report.json and CSV outputs")
        p.add_argument("--firm", type=float, default=0.0, help="firm capacity in MW")
        p.add_argument("--cost", default="linear", help="linear | power:<p> | pwl:<file>")
        p.add_argument("--parallel", type=int, default=1, help="threads for scenario evaluation")
        if name == "efc":
            p.add_argument("--candidate", required=True, help="ID,POWER_MW,ENERGY_MWH")
        if name == "simulate":
            p.add_argument(
                "--policy", default="rolling-intrinsic", choices=["rolling-intrinsic", "greedy", "first-step-search"]
            )
            p.add_argument("--forecaster", default="expected", choices=["expected", "persistence", "perfect"])
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args, out)
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except (DataFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
