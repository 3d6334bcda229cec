"""
Feasibility from profiles alone
===============================

Sort each store by how long it can run at full power and sort demand into
a load duration curve. The fleet can cover the trace exactly when the
cumulative storage curve stays above the cumulative demand curve.
"""

from pathlib import Path

from storage_adequacy import Fleet, demand_profile, feasible_by_profile, storage_profile
from storage_adequacy.io import read_demand_csv, read_fleet_config

data = Path(__file__).parent / "data"
fleet, grid = read_fleet_config(data / "example1_fleet.json")
demand = read_demand_csv(data / "example1_demand.csv", grid["step_hours"])

s = storage_profile(fleet)
d = demand_profile(demand)
print("storage profile: durations", s.durations, "levels", s.levels)
print("demand profile:  durations", d.durations, "levels", d.levels)

res = feasible_by_profile(fleet, demand)
print("feasible:", res.feasible)
for t, cs, cd in zip(res.times, res.cum_storage, res.cum_demand):
    print(f"  t={t:4.1f} h  storage {cs:6.0f}  demand {cd:6.0f}")
print(f"first violation at {res.first_violation} h, worst deficit {res.max_deficit:.0f} MWh at {res.max_deficit_at} h")

# Splitting every store into two of the same duration leaves the profile,
# and so the answer, unchanged.
split = Fleet.from_arrays(
    list(fleet.powers * 0.3) + list(fleet.powers * 0.7),
    list(fleet.energies * 0.3) + list(fleet.energies * 0.7),
)
print("split fleet feasible:", feasible_by_profile(split, demand).feasible)
