import numpy as np
import pytest

from apptsched.model import Horizon, Instance, Patient, PatientSchedule, PopulationSchedule


def random_instance(
    rng: np.random.Generator,
    periods=None,
    real_slots=None,
    population=None,
    with_labels=False,
) -> Instance:
    """Small random instance for property tests."""
    k = int(periods if periods is not None else rng.integers(1, 7))
    t = int(real_slots if real_slots is not None else rng.integers(1, 4))
    p = int(population if population is not None else rng.integers(1, 5))
    patients = []
    for i in range(p):
        alpha = float(rng.uniform(0.5, 0.99))
        no_show = tuple(float(x) for x in rng.uniform(0.0, 1.0, size=t)) + (1.0,)
        labels = {}
        if with_labels:
            labels = {
                "tod": str(rng.choice(["AM", "Noon", "PM"])),
                "severity": str(rng.choice(["mild", "severe"])),
                "reliability": str(rng.choice(["reliable", "unreliable"])),
            }
        patients.append(Patient(index=i, control_prob=alpha, no_show=no_show, labels=labels))
    return Instance(horizon=Horizon(k, t), patients=tuple(patients))


def random_population_schedule(rng: np.random.Generator, inst: Instance) -> PopulationSchedule:
    """Random feasible schedule: per period, a random injective partial
    assignment of patients to real slots, everyone else unscheduled."""
    horizon = inst.horizon
    fict = horizon.fictitious_slot
    grid = [[fict] * horizon.periods for _ in range(inst.population)]
    for k in range(horizon.periods):
        patients = rng.permutation(inst.population)
        slots = rng.permutation(horizon.real_slots)
        n_assign = int(rng.integers(0, min(inst.population, horizon.real_slots) + 1))
        for i in range(n_assign):
            grid[int(patients[i])][k] = int(slots[i]) + 1
    return PopulationSchedule(tuple(PatientSchedule(tuple(row)) for row in grid))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
