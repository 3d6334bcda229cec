"""
What is one more battery worth in firm megawatts?
=================================================

Adding firm capacity z lowers unserved energy at a rate equal to the loss
of load duration counted only over stores that do not run dry early. A
small extra store is then worth its energy divided by that duration.
"""

from pathlib import Path

import numpy as np

from storage_adequacy import Store, adequacy_report, eeu, efc_marginal
from storage_adequacy.io import read_demand_csv, read_fleet_config

data = Path(__file__).parent / "data"
fleet, grid = read_fleet_config(data / "example1_fleet.json")
demand = read_demand_csv(data / "example1_demand.csv", grid["step_hours"])

rep = adequacy_report(fleet, demand)
print(f"EEU {rep.eeu:.0f} MWh, LOLE {rep.lole_sne} h, dEEU/dz {rep.eeu_derivative}")

# EEU as a function of firm capacity: convex, slope -4 at zero
for z in np.linspace(0, 100, 6):
    print(f"  z={z:5.1f} MW  EEU={eeu(fleet, demand, z):7.2f} MWh")

candidate = Store("extra", 10.0, 40.0)
res = efc_marginal(fleet, candidate, demand)
print(f"candidate {candidate.power} MW / {candidate.energy} MWh: EEU drops {res.delta_eeu:.1f} MWh, EFC {res.efc:.1f} MW")
