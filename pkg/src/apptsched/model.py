"""Domain model: horizon, patients, instances, schedules, and the canonical
JSON document formats they serialize to.

Slot indices are 1-based throughout the public API: slots ``1..T`` are real
appointment slots, slot ``T+1`` is the fictitious "not scheduled" slot whose
no-show probability is pinned to 1.  Periods are indexed ``1..K``; the
guaranteed visit in period 0 is implicit and not stored.
"""

import json
from dataclasses import dataclass, field

TOD_LABELS = ("AM", "Noon", "PM")
LABEL_KEYS = ("tod", "severity", "reliability")

_DOCUMENT_VERSION = 1


class InstanceError(ValueError):
    """Malformed instance document or violated instance invariant."""


class ScheduleError(ValueError):
    """Malformed schedule or schedule/instance dimension mismatch."""


def quantize(value: float) -> float:
    """Round to 12 significant decimal digits (round-half-even).

    All decimals in instance documents carry at most 12 significant digits;
    values quantized this way round-trip bit-exactly through JSON.
    """
    return float(f"{float(value):.12g}")


@dataclass(frozen=True)
class Horizon:
    """Planning horizon: ``periods`` clinic days of ``real_slots`` slots each."""

    periods: int
    real_slots: int

    def __post_init__(self):
        if not isinstance(self.periods, int) or self.periods < 1:
            raise InstanceError(f"periods must be a positive integer, got {self.periods!r}")
        if not isinstance(self.real_slots, int) or self.real_slots < 1:
            raise InstanceError(f"real_slots must be a positive integer, got {self.real_slots!r}")

    @property
    def fictitious_slot(self) -> int:
        return self.real_slots + 1

    @property
    def n_slots(self) -> int:
        """Real slots plus the fictitious one."""
        return self.real_slots + 1


@dataclass(frozen=True)
class Patient:
    """One patient: disease severity, slot-dependent no-show probabilities,
    and optional cohorting labels.

    ``control_prob`` is the per-period probability that a controlled patient
    stays controlled (lower = more severe).  ``no_show`` has one entry per
    slot including the fictitious slot, whose entry must be exactly 1.
    """

    index: int
    control_prob: float
    no_show: tuple[float, ...]
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.control_prob <= 1.0:
            raise InstanceError(
                f"patient {self.index}: control probability must be in (0, 1], "
                f"got {self.control_prob!r}"
            )
        if len(self.no_show) < 2:
            raise InstanceError(f"patient {self.index}: no_show needs at least one real slot")
        for t, prob in enumerate(self.no_show, start=1):
            if not 0.0 <= prob <= 1.0:
                raise InstanceError(
                    f"patient {self.index}: no-show probability for slot {t} out of [0, 1]: {prob!r}"
                )
        if self.no_show[-1] != 1.0:
            raise InstanceError(
                f"patient {self.index}: fictitious slot must have no-show probability 1, "
                f"got {self.no_show[-1]!r}"
            )
        for key in self.labels:
            if key not in LABEL_KEYS:
                raise InstanceError(f"patient {self.index}: unknown label {key!r}")
        if "tod" in self.labels and self.labels["tod"] not in TOD_LABELS:
            raise InstanceError(
                f"patient {self.index}: tod label must be one of {TOD_LABELS}, "
                f"got {self.labels['tod']!r}"
            )


@dataclass(frozen=True)
class Instance:
    """A population of patients sharing one horizon.

    Real slots have capacity 1; the fictitious slot has capacity equal to the
    population size.
    """

    horizon: Horizon
    patients: tuple[Patient, ...]

    def __post_init__(self):
        if len(self.patients) < 1:
            raise InstanceError("instance needs at least one patient")
        for i, pat in enumerate(self.patients):
            if pat.index != i:
                raise InstanceError(f"patient at position {i} has index {pat.index}")
            if len(pat.no_show) != self.horizon.n_slots:
                raise InstanceError(
                    f"patient {i}: no_show has {len(pat.no_show)} entries, "
                    f"expected {self.horizon.n_slots}"
                )

    @property
    def population(self) -> int:
        return len(self.patients)

    def capacity(self, slot: int) -> int:
        """Capacity of a slot in any one period."""
        if not 1 <= slot <= self.horizon.n_slots:
            raise ScheduleError(f"slot {slot} out of range 1..{self.horizon.n_slots}")
        return 1 if slot <= self.horizon.real_slots else self.population


@dataclass(frozen=True)
class PatientSchedule:
    """One slot choice (real or fictitious) per period."""

    slots: tuple[int, ...]

    def __post_init__(self):
        for k, slot in enumerate(self.slots, start=1):
            if not isinstance(slot, int) or slot < 1:
                raise ScheduleError(f"period {k}: slot must be a positive integer, got {slot!r}")

    def appointment_count(self, horizon: Horizon) -> int:
        """Number of real appointments over the horizon."""
        return sum(1 for s in self.slots if s <= horizon.real_slots)


@dataclass(frozen=True)
class PopulationSchedule:
    """One PatientSchedule per patient, in patient order."""

    schedules: tuple[PatientSchedule, ...]


@dataclass(frozen=True)
class Violation:
    """One feasibility violation found in a population schedule."""

    kind: str  # "capacity" or "slot_range"
    period: int
    slot: int
    patients: tuple[int, ...]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


class InfeasibleScheduleError(ScheduleError):
    def __init__(self, report: ValidationReport):
        super().__init__(f"infeasible schedule: {len(report.violations)} violation(s)")
        self.report = report


def validate_population_schedule(inst: Instance, sched: PopulationSchedule) -> ValidationReport:
    """Check slot ranges and per-(period, slot) capacities.

    Raises ScheduleError on dimension mismatch; capacity/range problems are
    collected into the returned report instead.
    """
    if len(sched.schedules) != inst.population:
        raise ScheduleError(
            f"schedule covers {len(sched.schedules)} patients, instance has {inst.population}"
        )
    horizon = inst.horizon
    for i, ps in enumerate(sched.schedules):
        if len(ps.slots) != horizon.periods:
            raise ScheduleError(
                f"patient {i}: schedule has {len(ps.slots)} periods, expected {horizon.periods}"
            )
    violations = []
    for k in range(1, horizon.periods + 1):
        users: dict[int, list[int]] = {}
        for i, ps in enumerate(sched.schedules):
            slot = ps.slots[k - 1]
            if slot > horizon.n_slots:
                violations.append(Violation("slot_range", k, slot, (i,)))
            else:
                users.setdefault(slot, []).append(i)
        for slot, ids in sorted(users.items()):
            if slot <= horizon.real_slots and len(ids) > 1:
                violations.append(Violation("capacity", k, slot, tuple(ids)))
    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Document formats
# ---------------------------------------------------------------------------


def _require(cond: bool, message: str):
    if not cond:
        raise InstanceError(message)


def load_instance(text: str) -> Instance:
    """Parse an instance document (see ``save_instance`` for the format)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "document must be a JSON object")
    _require(doc.get("version") == _DOCUMENT_VERSION, f"unsupported version {doc.get('version')!r}")
    periods = doc.get("K")
    real_slots = doc.get("T")
    _require(isinstance(periods, int), "K must be an integer")
    _require(isinstance(real_slots, int), "T must be an integer")
    horizon = Horizon(periods, real_slots)
    raw_patients = doc.get("patients")
    _require(isinstance(raw_patients, list) and raw_patients, "patients must be a nonempty list")
    patients = []
    for i, raw in enumerate(raw_patients):
        _require(isinstance(raw, dict), f"patient {i}: must be an object")
        alpha = raw.get("alpha")
        _require(isinstance(alpha, (int, float)), f"patient {i}: alpha must be a number")
        no_show = raw.get("no_show")
        _require(
            isinstance(no_show, list) and len(no_show) == real_slots,
            f"patient {i}: no_show must list exactly {real_slots} probabilities",
        )
        _require(
            all(isinstance(p, (int, float)) for p in no_show),
            f"patient {i}: no_show entries must be numbers",
        )
        labels = raw.get("labels", {})
        _require(isinstance(labels, dict), f"patient {i}: labels must be an object")
        _require(
            all(isinstance(v, str) for v in labels.values()),
            f"patient {i}: label values must be strings",
        )
        patients.append(
            Patient(
                index=i,
                control_prob=float(alpha),
                no_show=tuple(float(p) for p in no_show) + (1.0,),
                labels=dict(labels),
            )
        )
    return Instance(horizon=horizon, patients=tuple(patients))


def save_instance(inst: Instance) -> str:
    """Serialize to the canonical instance document.

    Canonical means: sorted keys, two-space indent, decimals quantized to 12
    significant digits, and the fictitious slot omitted (it is implied).
    ``load_instance`` inverts this exactly for instances whose probabilities
    already carry at most 12 significant digits.
    """
    doc = {
        "version": _DOCUMENT_VERSION,
        "K": inst.horizon.periods,
        "T": inst.horizon.real_slots,
        "patients": [
            {
                "alpha": quantize(pat.control_prob),
                "no_show": [quantize(p) for p in pat.no_show[:-1]],
                **({"labels": dict(sorted(pat.labels.items()))} if pat.labels else {}),
            }
            for pat in inst.patients
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def save_population_schedule(sched: PopulationSchedule, instance_id: str = "") -> str:
    doc = {
        "instance_id": instance_id,
        "slots": [list(ps.slots) for ps in sched.schedules],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_population_schedule(text: str) -> tuple[str, PopulationSchedule]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("slots"), list):
        raise ScheduleError("schedule document must be an object with a slots list")
    rows = doc["slots"]
    if not rows:
        raise ScheduleError("schedule document lists no patients")
    schedules = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or not all(isinstance(s, int) for s in row):
            raise ScheduleError(f"patient {i}: slots must be a list of integers")
        schedules.append(PatientSchedule(tuple(row)))
    return str(doc.get("instance_id", "")), PopulationSchedule(tuple(schedules))
