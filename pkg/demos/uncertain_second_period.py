"""
Hedging against an uncertain second period
==========================================

A store with 2 MW and 2 MWh faces demand 2 MW now and an unknown
Uniform[0, 4] MW next hour. Serving everything now is best for plain
energy unserved. A convex cost d**p pushes energy into reserve.
"""

import numpy as np

from storage_adequacy import (
    CostFunction,
    example2_instance,
    example2_monte_carlo,
    example2_objective,
    example2_optimal_rate,
    first_step_rate_search,
    rolling_intrinsic,
)

for p in (1.0, 1.01, 1.5, 1.79, 2.0, 3.0, 10.0):
    x = example2_optimal_rate(p)
    print(f"p={p:5.2f}  best rate now {x:.3f} MW  expected cost {example2_objective(p, x):.4f}")

# Sampling check of the closed form
mean, se = example2_monte_carlo(2.0, 1.0, rng=np.random.default_rng(0))
print(f"p=2, x=1: closed form {example2_objective(2.0, 1.0):.4f}, sampled {mean:.4f} +/- {se:.4f}")

# The same instance on a 401-point grid of second-period demands
fleet, scenarios = example2_instance()
w = CostFunction.power(1.79)
print("first-step search:", first_step_rate_search(fleet, scenarios, w).rate)
trace = rolling_intrinsic(fleet, scenarios, w=w)
print("rolling intrinsic commits", trace.first_step_totals[0], "MW, expected cost", round(trace.expected_cost, 4))
