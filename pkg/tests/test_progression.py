import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apptsched.model import (
    Horizon,
    InfeasibleScheduleError,
    Instance,
    Patient,
    PatientSchedule,
    PopulationSchedule,
    ScheduleError,
)
from apptsched.progression import (
    IntervalDistribution,
    alpha_powers,
    evaluate_population,
    expected_uncontrolled,
    perfect_adherence_arc_cost,
    simulate_population,
)

from conftest import random_instance, random_population_schedule
from oracles import attendance_enumeration_cost


def single_patient_instance(alpha, no_show_real, periods):
    horizon = Horizon(periods, len(no_show_real))
    pat = Patient(0, alpha, tuple(no_show_real) + (1.0,))
    return Instance(horizon, (pat,))


def never_scheduled_cost(alpha, periods):
    """Closed form: (K+1) - alpha (1 - alpha^{K+1}) / (1 - alpha)."""
    return (periods + 1) - alpha * (1 - alpha ** (periods + 1)) / (1 - alpha)


class TestArcCost:
    def test_single_period(self):
        assert perfect_adherence_arc_cost(1, 0.95) == pytest.approx(0.05, abs=1e-15)

    def test_perfect_control_never_deteriorates(self):
        for gap in (1, 5, 40):
            assert perfect_adherence_arc_cost(gap, 1.0) == 0.0

    def test_two_periods(self):
        # direct summation: 0.05 + (1 - 0.9025)
        assert perfect_adherence_arc_cost(2, 0.95) == pytest.approx(0.1475, abs=1e-15)

    def test_matches_term_by_term_sum(self, rng):
        for _ in range(20):
            alpha = float(rng.uniform(0.3, 1.0))
            gap = int(rng.integers(1, 30))
            expected = sum(1 - alpha**d for d in range(1, gap + 1))
            assert perfect_adherence_arc_cost(gap, alpha) == pytest.approx(expected, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            perfect_adherence_arc_cost(0, 0.9)
        with pytest.raises(ValueError):
            perfect_adherence_arc_cost(3, 0.0)
        with pytest.raises(ValueError):
            perfect_adherence_arc_cost(3, 1.5)


class TestIntervalDistribution:
    def test_guaranteed_show_keeps_point_mass(self):
        dist = IntervalDistribution.initial(4)
        assert dist.step(0.0) == IntervalDistribution.initial(4)

    def test_fictitious_slot_shifts(self):
        dist = IntervalDistribution.initial(4)
        for step in range(1, 4):
            dist = dist.step(1.0)
            assert dist.probs[step] == 1.0

    def test_two_partial_steps(self):
        # enumerate the four show/no-show outcomes of two Bernoulli(0.35) misses
        dist = IntervalDistribution.initial(4).step(0.35).step(0.35)
        assert dist.probs[0] == pytest.approx(0.65, abs=1e-15)
        assert dist.probs[1] == pytest.approx(0.2275, abs=1e-15)
        assert dist.probs[2] == pytest.approx(0.1225, abs=1e-15)
        assert dist.probs[3] == 0.0

    def test_support_exhaustion_guard(self):
        dist = IntervalDistribution.initial(1).step(1.0)
        with pytest.raises(ValueError):
            dist.step(1.0)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            IntervalDistribution((0.5, 0.4))  # does not sum to 1
        with pytest.raises(ValueError):
            IntervalDistribution.initial(3).step(1.5)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
    def test_sums_to_one_after_every_step(self, misses):
        dist = IntervalDistribution.initial(len(misses))
        for miss in misses:
            dist = dist.step(miss)
            assert abs(sum(dist.probs) - 1.0) <= 1e-12


class TestExpectedUncontrolled:
    def test_never_scheduled_closed_form(self):
        for alpha, periods in [(0.8, 1), (0.9, 13), (0.95, 50), (0.8, 50), (0.9, 1)]:
            inst = single_patient_instance(alpha, (0.5,), periods)
            sched = PatientSchedule((2,) * periods)
            value = expected_uncontrolled(inst, sched, 0)
            assert value == pytest.approx(never_scheduled_cost(alpha, periods), abs=1e-12)

    def test_all_shows_is_linear(self):
        for alpha, periods in [(0.8, 5), (0.9, 13), (0.99, 30)]:
            inst = single_patient_instance(alpha, (0.0,), periods)
            sched = PatientSchedule((1,) * periods)
            value = expected_uncontrolled(inst, sched, 0)
            assert value == pytest.approx((periods + 1) * (1 - alpha), abs=1e-12)

    def test_single_period_two_leaf_tree(self, rng):
        for _ in range(20):
            alpha = float(rng.uniform(0.5, 0.99))
            miss = float(rng.uniform(0.0, 1.0))
            inst = single_patient_instance(alpha, (miss,), 1)
            value = expected_uncontrolled(inst, PatientSchedule((1,)), 0)
            expected = (1 - alpha) + (1 - miss) * (1 - alpha) + miss * (1 - alpha**2)
            assert value == pytest.approx(expected, abs=1e-12)

    def test_matches_attendance_enumeration(self, rng):
        for _ in range(60):
            inst = random_instance(rng, population=1)
            sched = random_population_schedule(rng, inst).schedules[0]
            exact = expected_uncontrolled(inst, sched, 0)
            oracle = attendance_enumeration_cost(inst, sched, 0)
            assert exact == pytest.approx(oracle, abs=1e-10)

    def test_trace_sums_to_total(self, rng):
        inst = random_instance(rng, periods=6, real_slots=3, population=1)
        sched = random_population_schedule(rng, inst).schedules[0]
        total, trace = expected_uncontrolled(inst, sched, 0, return_trace=True)
        assert len(trace) == inst.horizon.periods + 1
        assert total == pytest.approx(math.fsum(trace), abs=1e-12)
        assert trace[0] == pytest.approx(1 - inst.patients[0].control_prob, abs=1e-15)

    def test_monotone_in_control_prob(self):
        periods, miss = 8, 0.4
        values = []
        for alpha in np.arange(0.80, 0.951, 0.01):
            inst = single_patient_instance(float(alpha), (miss, 0.9), periods)
            sched = PatientSchedule((1, 2) * (periods // 2))
            values.append(expected_uncontrolled(inst, sched, 0))
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_monotone_in_no_show(self):
        periods = 6
        values = []
        for miss in np.linspace(0.0, 1.0, 11):
            inst = single_patient_instance(0.85, (float(miss),), periods)
            sched = PatientSchedule((1,) * periods)
            values.append(expected_uncontrolled(inst, sched, 0))
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_invalid_slot_rejected(self):
        inst = single_patient_instance(0.9, (0.1,), 3)
        with pytest.raises(ScheduleError):
            expected_uncontrolled(inst, PatientSchedule((1, 5, 1)), 0)
        with pytest.raises(ScheduleError):
            expected_uncontrolled(inst, PatientSchedule((1, 1)), 0)


class TestEvaluatePopulation:
    def test_identical_patients_identical_costs(self):
        horizon = Horizon(4, 3)
        pat = lambda i: Patient(i, 0.85, (0.2, 0.3, 0.4, 1.0))
        inst = Instance(horizon, (pat(0), pat(1), pat(2)))
        sched = PopulationSchedule(
            (
                PatientSchedule((1, 2, 3, 4)),
                PatientSchedule((2, 3, 1, 4)),
                PatientSchedule((3, 1, 2, 4)),
            )
        )
        result = evaluate_population(inst, sched)
        # same multiset of slots in a different order is not the same cost,
        # but symmetric rotations of identical patients are
        assert result.total == pytest.approx(math.fsum(result.per_patient), abs=1e-9)

    def test_single_patient_total_equals_expected(self, rng):
        inst = random_instance(rng, population=1)
        sched = random_population_schedule(rng, inst)
        result = evaluate_population(inst, sched)
        assert result.total == pytest.approx(
            expected_uncontrolled(inst, sched.schedules[0], 0), abs=1e-12
        )

    def test_real_slot_strictly_beats_fictitious(self, rng):
        for _ in range(25):
            inst = random_instance(rng, population=1)
            fict = inst.horizon.fictitious_slot
            slots = list(random_population_schedule(rng, inst).schedules[0].slots)
            k = int(rng.integers(0, inst.horizon.periods))
            slots[k] = fict
            base = evaluate_population(
                inst, PopulationSchedule((PatientSchedule(tuple(slots)),))
            ).total
            # replace that fictitious slot with any real slot with miss < 1
            candidates = [
                t
                for t in range(1, inst.horizon.real_slots + 1)
                if inst.patients[0].no_show[t - 1] < 1.0
            ]
            if not candidates:
                continue
            slots[k] = candidates[0]
            better = evaluate_population(
                inst, PopulationSchedule((PatientSchedule(tuple(slots)),))
            ).total
            assert better < base + 1e-15

    def test_per_patient_cost_bounds(self, rng):
        for _ in range(20):
            inst = random_instance(rng)
            sched = random_population_schedule(rng, inst)
            result = evaluate_population(inst, sched)
            for i, cost in enumerate(result.per_patient):
                alpha = inst.patients[i].control_prob
                assert 1 - alpha - 1e-12 <= cost <= inst.horizon.periods + 1 + 1e-12

    def test_infeasible_schedule_raises_with_report(self):
        inst = random_instance(np.random.default_rng(7), periods=2, real_slots=2, population=2)
        sched = PopulationSchedule((PatientSchedule((1, 1)), PatientSchedule((1, 2))))
        with pytest.raises(InfeasibleScheduleError) as err:
            evaluate_population(inst, sched)
        assert err.value.report.violations


class TestSimulate:
    def test_degenerate_all_shows(self):
        inst = single_patient_instance(0.9, (0.0,), 5)
        sched = PopulationSchedule((PatientSchedule((1,) * 5),))
        result = simulate_population(inst, sched, trials=500, seed=42)
        assert result.mean == pytest.approx(6 * 0.1, abs=1e-12)
        assert result.halfwidth == 0.0

    def test_degenerate_never_scheduled(self):
        inst = single_patient_instance(0.9, (0.3,), 6)
        sched = PopulationSchedule((PatientSchedule((2,) * 6),))
        result = simulate_population(inst, sched, trials=500, seed=42)
        assert result.mean == pytest.approx(never_scheduled_cost(0.9, 6), abs=1e-12)
        assert result.halfwidth == 0.0

    def test_deterministic_given_seed(self, rng):
        inst = random_instance(rng, population=2)
        sched = random_population_schedule(rng, inst)
        a = simulate_population(inst, sched, trials=2000, seed=7)
        b = simulate_population(inst, sched, trials=2000, seed=7)
        assert a == b
        c = simulate_population(inst, sched, trials=2000, seed=8)
        assert c.mean != a.mean  # astronomically unlikely to collide

    def test_worker_split_changes_stream_not_levels(self, rng):
        inst = random_instance(rng, population=2)
        sched = random_population_schedule(rng, inst)
        exact = evaluate_population(inst, sched).total
        for workers in (1, 3):
            result = simulate_population(inst, sched, trials=60_000, seed=11, workers=workers)
            assert abs(result.mean - exact) <= 4 * result.halfwidth

    def test_mean_converges_to_exact(self, rng):
        for _ in range(5):
            inst = random_instance(rng)
            sched = random_population_schedule(rng, inst)
            exact = evaluate_population(inst, sched).total
            result = simulate_population(inst, sched, trials=100_000, seed=3)
            assert abs(result.mean - exact) <= 3 * max(result.halfwidth, 1e-9)

    def test_validation_errors(self, rng):
        inst = random_instance(rng, population=1)
        sched = random_population_schedule(rng, inst)
        with pytest.raises(ValueError):
            simulate_population(inst, sched, trials=0, seed=1)


def test_alpha_powers_definition():
    apow = alpha_powers(0.9, 5)
    assert apow.shape == (6,)
    for l in range(6):
        assert apow[l] == pytest.approx(0.9 ** (l + 1), rel=1e-14)
