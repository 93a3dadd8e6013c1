"""Cohort-based scheduling policies: plain rotation, cohort rotation with
optional slot reversing, and fractional slot allocation across cohorts.

All policies are deterministic.  Within a cohort, patients are scheduled
round-robin in ascending id order.  A patient is never given two slots in the
same period: if the rotation would do so (cohort with more slots than
patients), the extra slot is left unassigned while the rotation pointer still
advances.
"""

import math
from dataclasses import dataclass

from .model import Horizon, Instance, PatientSchedule, PopulationSchedule

STRATEGY_KINDS = ("zero", "time", "severity", "reliability")

# Built-in slot fractions, keyed by cohort composition.
TOD_FRACTIONS = {
    (20, 0, 0): (1.0, 0.0, 0.0),
    (16, 2, 2): (3 / 4, 1 / 8, 1 / 8),
    (10, 5, 5): (1 / 2, 1 / 4, 1 / 4),
    (10, 0, 10): (1 / 2, 0.0, 1 / 2),
    (5, 10, 5): (1 / 4, 1 / 2, 1 / 4),
    (7, 6, 7): (3 / 8, 2 / 8, 3 / 8),
}
SEVERITY_FRACTIONS = (5 / 8, 3 / 8)  # (severe, mild)
RELIABILITY_FRACTIONS = (3 / 8, 5 / 8)  # (reliable, unreliable)
SEVERITY_THRESHOLD = 0.85  # on control_prob, below = severe
POLICY_NAMES = ("rotation", "time", "severity", "reliability")


class CohortError(ValueError):
    """Invalid cohort structure or strategy/instance mismatch."""


@dataclass(frozen=True)
class Cohort:
    """An ordered group of patients plus the real slots it owns each period."""

    patients: tuple[int, ...]
    slots: tuple[int, ...]
    name: str = ""


@dataclass(frozen=True)
class CohortStrategy:
    """How to partition patients: by nothing ("zero"), time-of-day label,
    severity, or reliability; ``fractions`` overrides the built-in slot
    fractions (one entry per cohort, summing to 1)."""

    kind: str
    fractions: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise CohortError(f"unknown strategy kind {self.kind!r}")
        if self.fractions is not None:
            _check_fractions(self.fractions)


def _check_fractions(fractions) -> None:
    if any(f < 0 for f in fractions):
        raise CohortError("fractions must be nonnegative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CohortError(f"fractions must sum to 1, got {sum(fractions)!r}")


def _check_cohorts(inst: Instance, cohorts: list[Cohort] | tuple[Cohort, ...]) -> None:
    seen_patients: set[int] = set()
    seen_slots: set[int] = set()
    for c in cohorts:
        if c.patients and not c.slots:
            raise CohortError(f"cohort {c.name or c.patients}: patients but no slots")
        for p in c.patients:
            if not 0 <= p < inst.population or p in seen_patients:
                raise CohortError(f"patient {p} missing from instance or in two cohorts")
            seen_patients.add(p)
        for s in c.slots:
            if not 1 <= s <= inst.horizon.real_slots or s in seen_slots:
                raise CohortError(f"slot {s} out of range or in two cohorts")
            seen_slots.add(s)


def rotation_schedule(inst: Instance) -> PopulationSchedule:
    """Round-robin rotation of the whole population over all real slots,
    period by period; patients without a slot in a period are unscheduled."""
    horizon = inst.horizon
    fict = horizon.fictitious_slot
    grid = [[fict] * horizon.periods for _ in range(inst.population)]
    i = 0
    for k in range(horizon.periods):
        taken: set[int] = set()
        for t in range(1, horizon.real_slots + 1):
            if i not in taken:
                grid[i][k] = t
                taken.add(i)
            i = (i + 1) % inst.population
    return PopulationSchedule(tuple(PatientSchedule(tuple(row)) for row in grid))


def _cohort_rotate(grid, cohort: Cohort, periods: int, reverse: bool) -> None:
    """Fill one cohort's assignments into ``grid`` (patient x period, 1-based
    slots).  With ``reverse``, the slot traversal direction flips when the
    patient rotation wraps.  The flip takes effect at the next period
    boundary: when the patient count is a multiple of the slot count (the
    case reversing exists for) wraps happen exactly at period ends anyway,
    and deferring keeps each period's slots collision-free in every other
    case."""
    n = len(cohort.patients)
    width = len(cohort.slots)
    if n == 0 or width == 0:
        return
    i = 0
    upward = True
    for k in range(periods):
        taken: set[int] = set()
        flips = 0
        for j in range(width):
            slot = cohort.slots[j] if upward else cohort.slots[width - j - 1]
            pid = cohort.patients[i]
            if pid not in taken:
                grid[pid][k] = slot
                taken.add(pid)
            if i == n - 1:
                i = 0
                flips += 1
            else:
                i += 1
        if reverse and flips % 2 == 1:
            upward = not upward


def cohort_schedule(
    inst: Instance,
    cohorts: list[Cohort] | tuple[Cohort, ...],
    reverse_on_multiple: bool = True,
) -> PopulationSchedule:
    """Rotation within each cohort over that cohort's slots.

    When the cohort's patient count is a multiple of its slot count, plain
    rotation would pin each patient to a single slot forever; in that case
    the slot-reversing variant is used instead (disable with
    ``reverse_on_multiple=False``).
    """
    _check_cohorts(inst, cohorts)
    horizon = inst.horizon
    fict = horizon.fictitious_slot
    grid = [[fict] * horizon.periods for _ in range(inst.population)]
    for cohort in cohorts:
        reverse = (
            reverse_on_multiple
            and len(cohort.slots) > 0
            and len(cohort.patients) % len(cohort.slots) == 0
        )
        _cohort_rotate(grid, cohort, horizon.periods, reverse)
    return PopulationSchedule(tuple(PatientSchedule(tuple(row)) for row in grid))


def slot_reversing_schedule(
    inst: Instance, cohorts: list[Cohort] | tuple[Cohort, ...]
) -> PopulationSchedule:
    """Cohort rotation that always flips slot direction when the patient
    rotation wraps, regardless of the counts."""
    _check_cohorts(inst, cohorts)
    horizon = inst.horizon
    fict = horizon.fictitious_slot
    grid = [[fict] * horizon.periods for _ in range(inst.population)]
    for cohort in cohorts:
        _cohort_rotate(grid, cohort, horizon.periods, reverse=True)
    return PopulationSchedule(tuple(PatientSchedule(tuple(row)) for row in grid))


def allocate_slots(fractions, m: int) -> list[tuple[int, ...]]:
    """Spread ``m`` slot positions across cohorts with the given fractions.

    Cohorts are processed in increasing-fraction order (stable on ties).  A
    non-final cohort with fraction f receives exactly ceil(f * remaining)
    positions at ranks ceil(j/f), j = 1..count, among the still-unassigned
    positions; the final cohort takes the remainder.  Formula ranks that
    overflow the remaining range fall back to the highest unassigned ranks.
    Returns the 1-based position sets in the original cohort order.
    """
    _check_fractions(fractions)
    if m < 0:
        raise ValueError("m must be nonnegative")
    order = sorted(range(len(fractions)), key=lambda c: fractions[c])
    remaining = list(range(1, m + 1))
    remaining_fraction = 1.0
    result: list[tuple[int, ...]] = [()] * len(fractions)
    for pos, c in enumerate(order):
        if pos == len(order) - 1:
            result[c] = tuple(remaining)
            break
        if fractions[c] <= 1e-15:
            continue
        f = fractions[c] / remaining_fraction
        count = min(math.ceil(f * len(remaining)), len(remaining))
        ranks: set[int] = set()
        overflow = 0
        for j in range(1, count + 1):
            rank = math.ceil(j / f)
            if rank <= len(remaining) and rank not in ranks:
                ranks.add(rank)
            else:
                overflow += 1
        rank = len(remaining)
        while overflow > 0:
            if rank not in ranks:
                ranks.add(rank)
                overflow -= 1
            rank -= 1
        result[c] = tuple(remaining[r - 1] for r in sorted(ranks))
        remaining = [p for r, p in enumerate(remaining, start=1) if r not in ranks]
        remaining_fraction -= fractions[c]
    return result


def positions_to_slots(positions, horizon: Horizon) -> list[tuple[int, int]]:
    """Map 1-based positions in the lexicographic (period, slot) order to
    (period, slot) pairs."""
    out = []
    for p in positions:
        if not 1 <= p <= horizon.periods * horizon.real_slots:
            raise ValueError(f"position {p} out of range")
        out.append(((p - 1) // horizon.real_slots + 1, (p - 1) % horizon.real_slots + 1))
    return out


def _time_slot_blocks(counts: tuple[int, int, int], horizon: Horizon) -> list[tuple[int, ...]]:
    """Contiguous per-period slot blocks for (AM, Noon, PM) cohorts: the noon
    block straddles the midday boundary, AM takes the earliest remaining
    slots, PM the latest."""
    am_count, noon_count, pm_count = counts
    t = horizon.real_slots
    mid = t // 2
    noon = tuple(range(mid - noon_count // 2 + 1, mid + (noon_count + 1) // 2 + 1))
    rest = [s for s in range(1, t + 1) if s not in noon]
    am = tuple(rest[:am_count])
    pm = tuple(rest[am_count : am_count + pm_count])
    return [am, noon, pm]


def _split_counts(fractions, total: int) -> list[int]:
    """Integer slot counts per cohort via largest remainder."""
    raw = [f * total for f in fractions]
    counts = [math.floor(r) for r in raw]
    shortfall = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda c: (counts[c] - raw[c], c))
    for c in order[:shortfall]:
        counts[c] += 1
    return counts


def _severity_class(pat) -> str:
    if "severity" in pat.labels:
        return pat.labels["severity"]
    return "severe" if pat.control_prob < SEVERITY_THRESHOLD else "mild"


def build_cohorts(inst: Instance, strategy: CohortStrategy) -> list[Cohort]:
    """Partition patients and real slots according to a cohort strategy.

    Time cohorts receive contiguous per-period slot blocks sized by the
    built-in (or explicit) fractions; severity and reliability cohorts
    receive slots spread across the period via :func:`allocate_slots`.
    Cohorts that end up with no patients are dropped.
    """
    horizon = inst.horizon
    if strategy.kind == "zero":
        return [
            Cohort(
                patients=tuple(range(inst.population)),
                slots=tuple(range(1, horizon.real_slots + 1)),
                name="all",
            )
        ]

    if strategy.kind == "time":
        groups = {label: [] for label in ("AM", "Noon", "PM")}
        for pat in inst.patients:
            tod = pat.labels.get("tod")
            if tod is None:
                raise CohortError(f"patient {pat.index} has no tod label")
            groups[tod].append(pat.index)
        counts = tuple(len(groups[label]) for label in ("AM", "Noon", "PM"))
        fractions = strategy.fractions or TOD_FRACTIONS.get(counts)
        if fractions is None:
            raise CohortError(
                f"no built-in slot fractions for time profile {counts}; pass explicit fractions"
            )
        slot_counts = _split_counts(fractions, horizon.real_slots)
        blocks = _time_slot_blocks(tuple(slot_counts), horizon)
        cohorts = [
            Cohort(patients=tuple(groups[label]), slots=blocks[j], name=label)
            for j, label in enumerate(("AM", "Noon", "PM"))
        ]
    else:
        if strategy.kind == "severity":
            first, second = "severe", "mild"
            classes = {pat.index: _severity_class(pat) for pat in inst.patients}
            default_fractions = SEVERITY_FRACTIONS
        else:
            first, second = "reliable", "unreliable"
            for pat in inst.patients:
                if "reliability" not in pat.labels:
                    raise CohortError(f"patient {pat.index} has no reliability label")
            classes = {pat.index: pat.labels["reliability"] for pat in inst.patients}
            default_fractions = RELIABILITY_FRACTIONS
        members = {
            first: [i for i, c in sorted(classes.items()) if c == first],
            second: [i for i, c in sorted(classes.items()) if c == second],
        }
        unknown = set(classes.values()) - {first, second}
        if unknown:
            raise CohortError(f"unknown {strategy.kind} classes {sorted(unknown)}")
        if not members[first] or not members[second]:
            # single class: one cohort over everything
            fractions: tuple[float, ...] = (1.0, 0.0) if members[first] else (0.0, 1.0)
        else:
            fractions = strategy.fractions or default_fractions
        for f, label in zip(fractions, (first, second)):
            if f <= 1e-15 and members[label]:
                raise CohortError(f"{label} cohort has patients but slot fraction 0")
        positions = allocate_slots(fractions, horizon.real_slots)
        cohorts = [
            Cohort(patients=tuple(members[label]), slots=positions[j], name=label)
            for j, label in enumerate((first, second))
        ]
    return [c for c in cohorts if c.patients]


def policy_schedule(
    inst: Instance,
    policy: str,
    fractions: tuple[float, ...] | None = None,
) -> PopulationSchedule:
    """Run a named policy: "rotation" (the 0-level strategy) or one of the
    1-level cohort strategies "time", "severity", "reliability"."""
    if policy == "rotation":
        return rotation_schedule(inst)
    if policy not in POLICY_NAMES:
        raise CohortError(f"unknown policy {policy!r}")
    cohorts = build_cohorts(inst, CohortStrategy(kind=policy, fractions=fractions))
    return cohort_schedule(inst, cohorts)
