"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary.
"""

import time
from contextlib import contextmanager

import numpy as np
from numpy.testing import assert_allclose

from conftest import ACCEPTANCE_LINES
from oracles import example1, lp_min_eeu, random_feasible_schedule, random_instance
from storage_adequacy import (
    CostFunction,
    DispatchSchedule,
    eeu_derivative,
    example2_monte_carlo,
    example2_objective,
    example2_optimal_rate,
    feasible_by_profile,
    greedy_lrtf_simulate,
    priority_simulate,
    sequential_threshold_schedule,
    weighted_eeu,
)
from test_adequacy import stabilised_fd
from test_weighted import check_certificate

N_RANDOM = 250


@contextmanager
def criterion(number, title):
    t0 = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE_LINES.append(f"FAIL criterion {number}: {title} ({type(exc).__name__}: {str(exc)[:120]})")
        print(ACCEPTANCE_LINES[-1])
        raise
    extra = "".join(f", {k}={v}" for k, v in detail.items())
    ACCEPTANCE_LINES.append(f"PASS criterion {number}: {title} ({time.perf_counter() - t0:.2f} s{extra})")
    print(ACCEPTANCE_LINES[-1])


def random_instances():
    rng = np.random.default_rng(123456)
    return [random_instance(rng, max_stores=3, max_steps=6) for _ in range(N_RANDOM)]


_ORACLE_CACHE = {}


def oracle_values():
    if not _ORACLE_CACHE:
        instances = random_instances()
        _ORACLE_CACHE["instances"] = instances
        _ORACLE_CACHE["lp"] = [lp_min_eeu(f, tr) for f, tr in instances]
    return _ORACLE_CACHE["instances"], _ORACLE_CACHE["lp"]


def test_c1_example1_reproduction():
    with criterion(1, "Example 1 greedy LRTF: served 1800, EEU 200, empty by step 6"):
        t0 = time.perf_counter()
        fleet, tr = example1()
        sim = greedy_lrtf_simulate(fleet, tr)
        assert time.perf_counter() - t0 < 1.0
        assert_allclose(sim.store_energy_served, 1800.0, atol=1e-6)
        assert_allclose(sim.unserved_energy, 200.0, atol=1e-6)
        # step 6 (1-based) ends at 3 h
        assert np.all(sim.remaining[:, 6] <= 1e-6)
        assert_allclose(sim.residual[:6], 0.0, atol=1e-6)
        assert_allclose(sim.residual[6:], [200.0, 200.0], atol=1e-6)


def test_c2_example1_threshold_policy():
    with criterion(2, "Example 1 threshold schedule: residual min(d, 50), weighted EEU 200"):
        fleet, tr = example1()
        for w in (CostFunction.linear(), CostFunction.power(2), CostFunction.power(3.5),
                  CostFunction.piecewise_linear([0, 30, 80], [1, 2, 5])):
            schedule, cert = sequential_threshold_schedule(fleet, tr, w)
            assert_allclose(cert.final_residual, np.minimum(tr.values, 50.0), atol=1e-6)
        schedule, _ = sequential_threshold_schedule(fleet, tr, CostFunction.linear())
        assert_allclose(weighted_eeu(schedule, tr, CostFunction.linear()), 200.0, atol=1e-6)


def test_c3_priority_heuristic_strands_energy():
    with criterion(3, "Example 1 priority dispatch strands 100 / 200 MWh"):
        fleet, tr = example1()
        order = np.argsort(-fleet.energies, kind="stable")
        desc = priority_simulate(fleet, tr, order=list(order))
        asc = priority_simulate(fleet, tr, order=list(order[::-1]))
        assert_allclose(desc.stranded_energy, 100.0, atol=1e-9)
        assert_allclose(asc.stranded_energy, 200.0, atol=1e-9)


def test_c4_example2_closed_form():
    with criterion(4, "Example 2 optimal first-period rate") as d:
        x = example2_optimal_rate(1.79)
        d["x*(1.79)"] = f"{x:.4f}"
        assert abs(x - 1.0) < 0.02
        xs = [example2_optimal_rate(p) for p in (1.01, 1.5, 2, 3, 5, 10)]
        assert all(a >= b for a, b in zip(xs, xs[1:]))
        assert example2_optimal_rate(1.0) == 2.0


def test_c5_lrtf_matches_lp_oracle():
    with criterion(5, "greedy LRTF EEU equals LP optimum on random instances") as d:
        t0 = time.perf_counter()
        instances, lp = oracle_values()
        worst = 0.0
        for (fleet, tr), ref in zip(instances, lp):
            ours = greedy_lrtf_simulate(fleet, tr).unserved_energy
            rel = abs(ours - ref) / max(abs(ref), 1.0)
            worst = max(worst, rel)
        d["instances"] = len(instances)
        d["worst_rel"] = f"{worst:.1e}"
        assert len(instances) >= 200
        assert worst <= 1e-6
        assert time.perf_counter() - t0 < 60.0


def test_c6_profile_feasibility_matches_oracle():
    with criterion(6, "profile feasibility test agrees with the LP oracle") as d:
        instances, lp = oracle_values()
        agree = sum(feasible_by_profile(f, tr).feasible == (ref <= 1e-9) for (f, tr), ref in zip(instances, lp))
        d["agreement"] = f"{agree}/{len(instances)}"
        assert agree == len(instances)


def test_c7_derivative_is_minus_lole():
    with criterion(7, "finite-difference dEEU/dz matches -LOLE(S_ne)") as d:
        rng = np.random.default_rng(777)
        done, worst = 0, 0.0
        while done < 60:
            fleet, tr = random_instance(rng)
            lole = -eeu_derivative(fleet, tr)
            if lole <= 0:
                continue
            done += 1
            fd = stabilised_fd(fleet, tr)
            worst = max(worst, abs(fd - lole) / lole)
        d["instances"] = done
        d["worst_rel"] = f"{worst:.1e}"
        assert worst <= 1e-6


def test_c8_threshold_schedule_properties():
    with criterion(8, "threshold schedule: order invariance, certificates, dominance") as d:
        rng = np.random.default_rng(888)
        costs = [CostFunction.linear(), CostFunction.power(2), CostFunction.piecewise_linear([0, 1, 2.5], [0.5, 1, 3])]
        n_instances = 20
        for _ in range(n_instances):
            fleet, tr = random_instance(rng)
            base, _ = sequential_threshold_schedule(fleet, tr)
            for _ in range(10):
                other, _ = sequential_threshold_schedule(fleet.reordered(rng.permutation(len(fleet))), tr)
                assert_allclose(other.total_rate, base.total_rate, rtol=1e-8, atol=1e-12)
            for w in costs:
                schedule, cert = sequential_threshold_schedule(fleet, tr, w)
                check_certificate(fleet, schedule, cert)
                best = weighted_eeu(schedule, tr, w)
                for _ in range(1000):
                    rates = random_feasible_schedule(rng, fleet, tr)
                    other = weighted_eeu(DispatchSchedule(fleet, tr.grid, rates, tr.values), tr, w)
                    assert best <= other + 1e-9 * max(1.0, other)
        d["instances"] = n_instances


def test_c9_example2_monte_carlo():
    with criterion(9, "Example 2 closed form agrees with Monte Carlo at 3 sigma") as d:
        p = 1.79
        x = example2_optimal_rate(p)
        mean, se = example2_monte_carlo(p, x, 10**6, rng=99)
        exact = example2_objective(p, x)
        d["z"] = f"{(mean - exact) / se:+.2f}"
        assert abs(mean - exact) <= 3 * se
