import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import random_instance
from storage_adequacy import (
    DemandTrace,
    Fleet,
    FleetState,
    InfeasibleTargetError,
    Store,
    greedy_lrtf_simulate,
    lole_of_set,
    lrtf_allocate_step,
    priority_simulate,
    validate_schedule,
)


def two_stores():
    return Fleet((Store("long", 1.0, 2.0), Store("short", 1.0, 1.0)))


class TestAllocateStep:
    def test_single_group_selected(self):
        fleet = two_stores()
        assert_allclose(lrtf_allocate_step(FleetState.full(fleet), fleet, 1.0), [1.0, 0.0])

    def test_all_groups(self):
        fleet = two_stores()
        assert_allclose(lrtf_allocate_step(FleetState.full(fleet), fleet, 2.0), [1.0, 1.0])

    def test_fractional_last_group(self):
        fleet = Fleet.from_arrays([1.0, 1.0, 2.0], [2.0, 2.0, 2.0])
        assert_allclose(lrtf_allocate_step(FleetState.full(fleet), fleet, 3.0), [1.0, 1.0, 1.0])

    def test_tied_group_shares_fraction(self):
        fleet = Fleet.from_arrays([1.0, 3.0, 1.0], [2.0, 6.0, 1.0])
        rates = lrtf_allocate_step(FleetState.full(fleet), fleet, 2.0)
        assert_allclose(rates, [0.5, 1.5, 0.0])

    def test_infeasible_target(self):
        fleet = two_stores()
        state = FleetState(np.array([2.0, 0.0]))
        with pytest.raises(InfeasibleTargetError) as exc:
            lrtf_allocate_step(state, fleet, 1.5)
        assert_allclose(exc.value.shortfall, 0.5)


class TestGreedySimulation:
    def test_example1(self, ex1):
        fleet, trace = ex1
        sim = greedy_lrtf_simulate(fleet, trace)
        assert_allclose(sim.store_energy_served, 1800.0, atol=1e-6)
        assert_allclose(sim.unserved_energy, 200.0, atol=1e-6)
        assert_allclose(sim.residual, [0, 0, 0, 0, 0, 0, 200, 200], atol=1e-9)
        assert_allclose(sim.remaining[:, 6], 0.0, atol=1e-9)
        assert_allclose(sim.empty_times, 3.0)
        assert sim.t_prime == 4.0
        assert sim.s_e == ("b1", "b2", "b3", "b4", "b5") and sim.s_ne == ()
        assert validate_schedule(fleet, trace, sim.schedule) == []

    def test_zero_demand(self, ex1):
        fleet, _ = ex1
        sim = greedy_lrtf_simulate(fleet, DemandTrace.from_values([0.0] * 4, 0.5))
        assert np.all(sim.schedule.rates == 0)
        assert sim.s_e == () and sim.t_prime == 0.0

    def test_single_store_tprime_edge(self):
        # the store serves 2 MW for the first hour and is empty at t = 1 h;
        # demand then exceeds available power until t = 2 h, so T' = 2 and the
        # store empties strictly before it
        fleet = Fleet((Store("a", 2.0, 2.0),))
        sim = greedy_lrtf_simulate(fleet, DemandTrace.from_values([2.0, 2.0], 1.0))
        assert_allclose(sim.schedule.rates, [[2.0, 0.0]])
        assert sim.empty_times[0] == 1.0 and sim.t_prime == 2.0
        assert sim.s_e == ("a",)

    def test_store_emptying_exactly_at_tprime_is_not_binding(self):
        # shortfall throughout; the store empties exactly at the end
        fleet = Fleet((Store("a", 1.0, 2.0),))
        sim = greedy_lrtf_simulate(fleet, DemandTrace.from_values([3.0, 3.0], 1.0))
        assert sim.t_prime == 2.0 and sim.empty_times[0] == 2.0
        assert sim.s_ne == ("a",)

    def test_mid_step_splitting_is_exact(self):
        # store b empties after 0.5 h inside the first step; a must pick up
        fleet = Fleet.from_arrays([1.0, 1.0], [3.0, 0.5], ids=["a", "b"])
        sim = greedy_lrtf_simulate(fleet, DemandTrace.from_values([2.0, 1.0], 1.0))
        assert_allclose(sim.schedule.rates[:, 0], [1.0, 0.5])
        assert_allclose(sim.residual, [0.5, 0.0])

    def test_group_merge_inside_step(self):
        # residual times 3 h and 1 h; target 1 MW uses only the longer store
        # until the two meet at t = 2 h, after which both share the load
        fleet = Fleet.from_arrays([1.0, 1.0], [3.0, 1.0])
        sim = greedy_lrtf_simulate(fleet, DemandTrace.from_values([1.0], 3.0))
        assert_allclose(sim.schedule.rates[:, 0] * 3.0, [2.5, 0.5])
        assert_allclose(sim.remaining[:, -1], [0.5, 0.5])

    def test_firm_capacity_first(self, ex1):
        fleet, trace = ex1
        sim = greedy_lrtf_simulate(fleet, trace, firm_capacity=1000.0)
        assert sim.unserved_energy == 0.0
        assert_allclose(sim.schedule.firm, trace.values)
        assert_allclose(sim.schedule.rates, 0.0)

    def test_greedy_totals_and_invariants(self, rng):
        for _ in range(150):
            fleet, trace = random_instance(rng, max_stores=4, max_steps=8)
            sim = greedy_lrtf_simulate(fleet, trace)
            assert validate_schedule(fleet, trace, sim.schedule) == []
            # no recharging
            assert np.all(np.diff(sim.remaining, axis=1) <= 1e-12)
            assert set(sim.s_e) | set(sim.s_ne) == set(fleet.ids)
            assert not set(sim.s_e) & set(sim.s_ne)
            idx = [fleet.ids.index(i) for i in sim.s_e]
            assert np.all(sim.remaining[idx, -1] <= 1e-9 * np.maximum(1, fleet.energies[idx]))

    def test_served_is_min_of_demand_and_available(self):
        # energies large enough that no store empties
        fleet = Fleet.from_arrays([1.0, 2.0, 0.5], [10.0, 10.0, 10.0])
        trace = DemandTrace.from_values([0.3, 2.9, 5.0, 1.7, 3.6], 0.5)
        sim = greedy_lrtf_simulate(fleet, trace)
        assert_allclose(sim.schedule.total_rate, np.minimum(trace.values, 3.5))

    def test_ordering_preserved_and_ties_persist(self, rng):
        for _ in range(100):
            fleet, trace = random_instance(rng, max_stores=4, max_steps=8)
            tau = greedy_lrtf_simulate(fleet, trace).residual_times()
            tol = 1e-9 * max(1.0, tau.max())
            for i in range(len(fleet)):
                for j in range(len(fleet)):
                    for t in range(tau.shape[1]):
                        if tau[i, t] >= tau[j, t] - tol:
                            assert np.all(tau[i, t:] >= tau[j, t:] - 1e-8)
                        if abs(tau[i, t] - tau[j, t]) <= tol:
                            assert_allclose(tau[i, t:], tau[j, t:], atol=1e-8)

    def test_sne_autonomy(self, rng):
        checked = 0
        for _ in range(200):
            fleet, trace = random_instance(rng, max_stores=4, max_steps=8)
            sim = greedy_lrtf_simulate(fleet, trace)
            if not sim.s_ne:
                continue
            checked += 1
            idx = [fleet.ids.index(i) for i in sim.s_ne]
            sub = fleet.subset(sim.s_ne)
            alone = greedy_lrtf_simulate(sub, trace)
            contribution = sim.schedule.rates[idx].sum(axis=0)
            assert_allclose(contribution, alone.schedule.total_rate, atol=1e-8)
            assert_allclose(contribution, np.minimum(trace.values, sub.powers.sum()), atol=1e-8)
        assert checked > 50

    def test_causal(self, rng):
        for _ in range(50):
            fleet, trace = random_instance(rng, max_stores=3, max_steps=6)
            m = trace.grid.n_steps
            cut = int(rng.integers(0, m))
            other = trace.values.copy()
            other[cut + 1 :] = rng.uniform(0, 5, m - cut - 1)
            a = greedy_lrtf_simulate(fleet, trace).schedule.rates
            b = greedy_lrtf_simulate(fleet, DemandTrace(trace.grid, other)).schedule.rates
            assert np.array_equal(a[:, : cut + 1], b[:, : cut + 1])

    def test_store_order_irrelevant(self, rng):
        for _ in range(50):
            fleet, trace = random_instance(rng)
            perm = rng.permutation(len(fleet))
            a = greedy_lrtf_simulate(fleet, trace)
            b = greedy_lrtf_simulate(fleet.reordered(perm), trace)
            assert_allclose(a.schedule.rates[perm], b.schedule.rates, atol=1e-9)
            assert set(a.s_e) == set(b.s_e)


class TestPriorityHeuristic:
    def test_example1_strands_energy(self, ex1):
        fleet, trace = ex1
        desc = priority_simulate(fleet, trace, order=[0, 1, 2, 3, 4])
        asc = priority_simulate(fleet, trace, order=[4, 3, 2, 1, 0])
        assert_allclose(desc.stranded_energy, 100.0, atol=1e-9)
        assert_allclose(asc.stranded_energy, 200.0, atol=1e-9)
        assert desc.unserved_energy > 200.0 and asc.unserved_energy > 200.0


class TestLole:
    def test_example1_empty_subset(self, ex1):
        assert lole_of_set(Fleet(), ex1[1]) == 4.0

    def test_ample_power(self, ex1):
        assert lole_of_set(Fleet((Store("x", 1000.0, 1.0),)), ex1[1]) == 0.0

    def test_zero_demand(self):
        assert lole_of_set(Fleet(), DemandTrace.from_values([0.0, 0.0], 1.0)) == 0.0
