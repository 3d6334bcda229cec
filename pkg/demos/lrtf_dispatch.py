"""
Serving a shortfall with five batteries
=======================================

Eight half-hour steps of unmet demand and five 200 MW batteries. The
greedy rule always draws from the stores that could run longest.
"""

from pathlib import Path

import numpy as np

from storage_adequacy import greedy_lrtf_simulate, priority_simulate
from storage_adequacy.io import read_demand_csv, read_fleet_config

data = Path(__file__).parent / "data"
fleet, grid = read_fleet_config(data / "example1_fleet.json")
demand = read_demand_csv(data / "example1_demand.csv", grid["step_hours"])

sim = greedy_lrtf_simulate(fleet, demand)
np.set_printoptions(precision=1, suppress=True)
print("rates (MW), one row per store")
print(sim.schedule.rates)
print("residual demand", sim.residual)
print("unserved", sim.unserved_energy, "MWh; all stores empty at", sim.empty_times, "h")

# Each store's residual time E/P shrinks together once the groups merge.
print("residual times (h) at step edges")
print(sim.residual_times())

# Fixed priority orders leave energy stuck in stores that run out of
# useful hours.
for name, order in [("largest first", [0, 1, 2, 3, 4]), ("smallest first", [4, 3, 2, 1, 0])]:
    pr = priority_simulate(fleet, demand, order=order)
    print(f"{name}: unserved {pr.unserved_energy:.0f} MWh, stranded {pr.stranded_energy:.0f} MWh")
