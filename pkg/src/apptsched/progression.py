"""Exact schedule evaluation under the two-state, perfect-repair progression
model, plus a seeded Monte Carlo estimator of the same quantity.

A controlled patient stays controlled for one more period with probability
``control_prob``; any attended visit resets the patient to controlled.  The
probability of being uncontrolled l+1 periods after the last attended visit
is ``1 - control_prob**(l+1)``; the objective sums this quantity over all
periods (including the implicit period-0 visit's term).
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .model import (
    Instance,
    PatientSchedule,
    PopulationSchedule,
    InfeasibleScheduleError,
    ScheduleError,
    validate_population_schedule,
)

_SUM_TOL = 1e-12
_Z95 = 1.959963984540054


def alpha_powers(control_prob: float, periods: int) -> np.ndarray:
    """``out[l] = control_prob**(l+1)`` for l = 0..periods.

    Single shared definition so every evaluation path (exact, pricing,
    simulation) uses bit-identical powers.
    """
    return np.cumprod(np.full(periods + 1, control_prob))


def perfect_adherence_arc_cost(gap: int, control_prob: float) -> float:
    """Aggregate uncontrolled probability across a gap of ``gap`` periods
    between two attended visits: sum of ``1 - control_prob**d`` for d=1..gap."""
    if not isinstance(gap, int) or gap < 1:
        raise ValueError(f"gap must be a positive integer, got {gap!r}")
    if not 0.0 < control_prob <= 1.0:
        raise ValueError(f"control probability must be in (0, 1], got {control_prob!r}")
    power = 1.0
    total = 0.0
    for _ in range(gap):
        power *= control_prob
        total += 1.0 - power
    return total


@dataclass(frozen=True)
class IntervalDistribution:
    """Distribution of the time since the last attended visit.

    ``probs[l]`` is the probability that the last attended visit was l
    periods ago, immediately after the current period's (possibly missed)
    appointment.  The vector has fixed length K+1; entries beyond the current
    period are zero.
    """

    probs: tuple[float, ...]

    def __post_init__(self):
        if not self.probs:
            raise ValueError("empty distribution")
        total = 0.0
        for l, p in enumerate(self.probs):
            if p < -1e-15:
                raise ValueError(f"negative probability at interval {l}: {p!r}")
            total += p
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"distribution sums to {total!r}, drift exceeds {_SUM_TOL}")

    @classmethod
    def initial(cls, periods: int) -> "IntervalDistribution":
        """Point mass at interval 0 (every patient is seen in period 0)."""
        return cls((1.0,) + (0.0,) * periods)

    def step(self, no_show_prob: float) -> "IntervalDistribution":
        """Advance one period through an appointment missed with probability
        ``no_show_prob``: show resets the interval to 0, a miss shifts it."""
        if not 0.0 <= no_show_prob <= 1.0:
            raise ValueError(f"no-show probability out of [0, 1]: {no_show_prob!r}")
        if self.probs[-1] * no_show_prob > 1e-300:
            raise ValueError("interval support exhausted; distribution too short for this step")
        shifted = (1.0 - no_show_prob,) + tuple(no_show_prob * p for p in self.probs[:-1])
        return IntervalDistribution(shifted)

    def uncontrolled_probability(self, apow: np.ndarray) -> float:
        """Expected probability of being uncontrolled in the period that
        follows, ``apow`` as produced by :func:`alpha_powers`."""
        return 1.0 - float(np.dot(np.asarray(self.probs), apow[: len(self.probs)]))


def _check_patient_schedule(inst: Instance, sched: PatientSchedule) -> None:
    if len(sched.slots) != inst.horizon.periods:
        raise ScheduleError(
            f"schedule has {len(sched.slots)} periods, expected {inst.horizon.periods}"
        )
    for k, slot in enumerate(sched.slots, start=1):
        if slot > inst.horizon.n_slots:
            raise ScheduleError(f"period {k}: slot {slot} out of range 1..{inst.horizon.n_slots}")


def expected_uncontrolled(
    inst: Instance,
    sched: PatientSchedule,
    patient: int,
    return_trace: bool = False,
):
    """Expected aggregate uncontrolled probability of one patient schedule.

    With ``return_trace`` the per-period increments are returned alongside the
    total; ``trace[0]`` is the period-0 term.
    """
    pat = inst.patients[patient]
    _check_patient_schedule(inst, sched)
    periods = inst.horizon.periods
    apow = alpha_powers(pat.control_prob, periods)
    if not return_trace:
        slots0 = np.asarray(sched.slots, dtype=np.int64) - 1
        return float(kernels.schedule_cost(slots0, np.asarray(pat.no_show), apow))
    dist = IntervalDistribution.initial(periods)
    increments = [1.0 - pat.control_prob]
    for slot in sched.slots:
        dist = dist.step(pat.no_show[slot - 1])
        increments.append(dist.uncontrolled_probability(apow))
    return math.fsum(increments), tuple(increments)


@dataclass(frozen=True)
class EvaluationResult:
    """Exact population objective: per-patient costs and their sum."""

    per_patient: tuple[float, ...]
    total: float
    per_period: tuple[tuple[float, ...], ...] | None = None


def evaluate_population(
    inst: Instance,
    sched: PopulationSchedule,
    check_feasible: bool = True,
    return_trace: bool = False,
) -> EvaluationResult:
    """Evaluate a full population schedule.

    Raises InfeasibleScheduleError (carrying the validation report) when
    ``check_feasible`` and the schedule violates capacities or slot ranges.
    """
    report = validate_population_schedule(inst, sched)
    if check_feasible and not report.ok:
        raise InfeasibleScheduleError(report)
    costs = []
    traces = [] if return_trace else None
    for i, ps in enumerate(sched.schedules):
        if return_trace:
            total, trace = expected_uncontrolled(inst, ps, i, return_trace=True)
            traces.append(trace)
        else:
            total = expected_uncontrolled(inst, ps, i)
        costs.append(total)
    return EvaluationResult(
        per_patient=tuple(costs),
        total=math.fsum(costs),
        per_period=tuple(traces) if return_trace else None,
    )


@dataclass(frozen=True)
class SimulationResult:
    """Monte Carlo estimate of the population objective."""

    mean: float
    halfwidth: float  # 95% normal-approximation confidence halfwidth
    trials: int
    workers: int
    seed: int


def simulate_population(
    inst: Instance,
    sched: PopulationSchedule,
    trials: int,
    seed: int,
    workers: int = 1,
) -> SimulationResult:
    """Estimate the population objective by simulating attendance.

    Each trial samples show/no-show per patient and period, tracks the
    realized time since the last attended visit, and accumulates the same
    uncontrolled probabilities the exact evaluation sums in expectation.
    Deterministic for fixed (seed, workers): worker w uses seed + w.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    report = validate_population_schedule(inst, sched)
    if not report.ok:
        raise InfeasibleScheduleError(report)
    periods = inst.horizon.periods
    chunk_sizes = [trials // workers + (1 if w < trials % workers else 0) for w in range(workers)]
    totals = []
    for w, chunk in enumerate(chunk_sizes):
        if chunk == 0:
            continue
        rng = np.random.default_rng(seed + w)
        acc = np.zeros(chunk)
        for i, ps in enumerate(sched.schedules):
            pat = inst.patients[i]
            show_prob = np.array([1.0 - pat.no_show[s - 1] for s in ps.slots])
            apow = alpha_powers(pat.control_prob, periods)
            uniforms = rng.random((chunk, periods))
            acc += kernels.simulate_schedule(uniforms, show_prob, apow)
        totals.append(acc)
    sample = np.concatenate(totals)
    mean = float(sample.mean())
    if trials < 2:
        halfwidth = math.inf
    elif float(sample.min()) == float(sample.max()):
        halfwidth = 0.0  # degenerate randomness: the sample is a point mass
    else:
        halfwidth = _Z95 * float(sample.std(ddof=1)) / math.sqrt(trials)
    return SimulationResult(mean=mean, halfwidth=halfwidth, trials=trials, workers=workers, seed=seed)
