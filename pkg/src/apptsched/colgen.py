"""Optimization-based scheduler: restricted master over schedule columns,
per-patient pricing on the layered period/slot network (exact multi-label and
expected-interval heuristic), and price-and-branch.

Master rows: one >=1 covering row per patient, one <=1 capacity row per
(period, real slot), and one <=P row per period for the fictitious slot.
Pricing consumes covering duals as-is and capacity duals negated, so a
schedule's reduced cost is  cost + sum(slot_duals over its slots) -
patient_dual.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .lp import GE, LE, LinearProgram, LpStatus, branch_and_bound, solve_lp
from .model import (
    Horizon,
    InfeasibleScheduleError,
    Instance,
    Patient,
    PatientSchedule,
    PopulationSchedule,
    validate_population_schedule,
)
from .policies import rotation_schedule
from .progression import alpha_powers, evaluate_population

DEFAULT_RC_TOL = 1e-7
DEFAULT_EXACT_HORIZON_LIMIT = 8


class SolverError(RuntimeError):
    """The LP engine returned a status the scheduler cannot proceed from."""


@dataclass(frozen=True)
class Column:
    """A priced patient schedule; ``cost`` is its exact expected aggregate
    uncontrolled probability."""

    patient: int
    schedule: PatientSchedule
    cost: float

    @property
    def key(self) -> tuple:
        return (self.patient, self.schedule.slots)


@dataclass(frozen=True)
class DualPrices:
    """Duals of a solved master, in pricing orientation.

    ``patient_duals[i]`` is patient i's covering dual (nonnegative);
    ``slot_duals[k, t]`` is the negated capacity dual of slot t+1 in period
    k+1 (nonnegative), with the last column holding the fictitious slot's
    (zero whenever that row is slack, i.e. always in practice).
    """

    patient_duals: np.ndarray
    slot_duals: np.ndarray


class Master:
    """Restricted master problem: column registry plus LP assembly."""

    def __init__(self, inst: Instance, seed_schedules: PopulationSchedule):
        report = validate_population_schedule(inst, seed_schedules)
        if not report.ok:
            raise InfeasibleScheduleError(report)
        self.inst = inst
        horizon = inst.horizon
        self.n_rows = inst.population + horizon.periods * horizon.real_slots + horizon.periods
        self.senses = tuple(
            [GE] * inst.population + [LE] * (horizon.periods * (horizon.real_slots + 1))
        )
        rhs = np.ones(self.n_rows)
        rhs[inst.population + horizon.periods * horizon.real_slots :] = inst.population
        self.rhs = rhs
        self.columns: list[Column] = []
        self._vectors: list[np.ndarray] = []
        self._keys: set[tuple] = set()
        for i, ps in enumerate(seed_schedules.schedules):
            self.add_column(make_column(inst, i, ps))

    def capacity_row(self, period: int, slot: int) -> int:
        """Row index of the capacity constraint for 1-based (period, slot)."""
        horizon = self.inst.horizon
        if slot <= horizon.real_slots:
            return self.inst.population + (period - 1) * horizon.real_slots + (slot - 1)
        return self.inst.population + horizon.periods * horizon.real_slots + (period - 1)

    def column_vector(self, col: Column) -> np.ndarray:
        vec = np.zeros(self.n_rows)
        vec[col.patient] = 1.0
        for k, slot in enumerate(col.schedule.slots, start=1):
            vec[self.capacity_row(k, slot)] += 1.0
        return vec

    def add_column(self, col: Column) -> bool:
        """Register a column unless an identical one is pooled already."""
        if col.key in self._keys:
            return False
        self._keys.add(col.key)
        self.columns.append(col)
        self._vectors.append(self.column_vector(col))
        return True

    def lp(self) -> LinearProgram:
        return LinearProgram(
            objective=np.array([c.cost for c in self.columns]),
            constraints=np.column_stack(self._vectors),
            senses=self.senses,
            rhs=self.rhs.copy(),
            upper=np.ones(len(self.columns)),
        )

    def dual_prices(self, duals: np.ndarray) -> DualPrices:
        inst = self.inst
        horizon = inst.horizon
        sigma = duals[: inst.population].copy()
        slot_duals = np.zeros((horizon.periods, horizon.real_slots + 1))
        cap = duals[inst.population : inst.population + horizon.periods * horizon.real_slots]
        slot_duals[:, : horizon.real_slots] = -cap.reshape(
            horizon.periods, horizon.real_slots
        )
        fict = duals[inst.population + horizon.periods * horizon.real_slots :]
        slot_duals[:, horizon.real_slots] = -fict
        return DualPrices(patient_duals=sigma, slot_duals=slot_duals)


def make_column(inst: Instance, patient: int, schedule: PatientSchedule) -> Column:
    pat = inst.patients[patient]
    apow = alpha_powers(pat.control_prob, inst.horizon.periods)
    slots0 = np.asarray(schedule.slots, dtype=np.int64) - 1
    cost = float(kernels.schedule_cost(slots0, np.asarray(pat.no_show), apow))
    return Column(patient=patient, schedule=schedule, cost=cost)


def reduced_cost(col: Column, duals: DualPrices) -> float:
    """cost + sum of slot duals along the schedule - the patient's covering
    dual; matches what both pricers report for deterministic schedules."""
    total = col.cost - duals.patient_duals[col.patient]
    for k, slot in enumerate(col.schedule.slots):
        total += duals.slot_duals[k, slot - 1]
    return total


# ---------------------------------------------------------------------------
# Pricing
# ---------------------------------------------------------------------------


def price_heuristic(
    patient: Patient, duals: DualPrices, horizon: Horizon
) -> tuple[Column, float]:
    """Best schedule under the expected-interval approximation.

    Keeps one (adjusted cost, expected interval) label per network node; the
    reported reduced cost is the approximation's, an upper bound on the true
    reduced cost of the returned schedule.  The returned column carries the
    exact cost.
    """
    cost_hat, slots0 = kernels.heuristic_path(
        np.asarray(patient.no_show), duals.slot_duals, patient.control_prob
    )
    schedule = PatientSchedule(tuple(int(s) + 1 for s in slots0))
    col = Column(
        patient=patient.index,
        schedule=schedule,
        cost=_exact_cost(patient, schedule, horizon),
    )
    return col, cost_hat - float(duals.patient_duals[patient.index])


def _exact_cost(patient: Patient, schedule: PatientSchedule, horizon: Horizon) -> float:
    apow = alpha_powers(patient.control_prob, horizon.periods)
    slots0 = np.asarray(schedule.slots, dtype=np.int64) - 1
    return float(kernels.schedule_cost(slots0, np.asarray(patient.no_show), apow))


def _exact_search(patient: Patient, duals: DualPrices, horizon: Horizon):
    """Exact label-setting over the layered network, one full interval
    distribution per label.  Labels with identical distributions merge to the
    cheaper one; incomparable labels coexist, so the search is exact.
    Returns the per-layer label buckets with parent pointers."""
    periods = horizon.periods
    n_nodes = horizon.real_slots + 1
    apow = alpha_powers(patient.control_prob, periods)
    no_show = patient.no_show
    source_dist = (1.0,) + (0.0,) * periods
    layers = [[{source_dist: (1.0 - patient.control_prob, 0, None)}]]
    for k in range(1, periods + 1):
        new: list[dict] = [dict() for _ in range(n_nodes)]
        for t_prev, bucket in enumerate(layers[-1]):
            for dist, (cost, _, _) in bucket.items():
                for t in range(n_nodes):
                    miss = no_show[t]
                    ndist = (1.0 - miss,) + tuple(miss * p for p in dist[:-1])
                    inc = 1.0 - sum(p * a for p, a in zip(ndist, apow))
                    ncost = cost + inc + float(duals.slot_duals[k - 1, t])
                    cur = new[t].get(ndist)
                    if cur is None or ncost < cur[0]:
                        new[t][ndist] = (ncost, t_prev, dist)
        layers.append(new)
    return layers


def _walk_back(layers, periods: int, t_final: int, dist) -> tuple[int, ...]:
    slots = [0] * periods
    node, key = t_final, dist
    for k in range(periods, 0, -1):
        slots[k - 1] = node + 1
        _, prev_node, prev_dist = layers[k][node][key]
        node, key = prev_node, prev_dist
    return tuple(slots)


def price_exact_candidates(
    patient: Patient,
    duals: DualPrices,
    horizon: Horizon,
    horizon_limit: int = DEFAULT_EXACT_HORIZON_LIMIT,
) -> list[tuple[float, tuple[int, ...]]]:
    """All final labels of the exact pricer as (reduced cost, slots),
    sorted by reduced cost then slots."""
    if horizon.periods > horizon_limit:
        raise ValueError(
            f"exact pricing limited to {horizon_limit} periods, instance has {horizon.periods}"
        )
    layers = _exact_search(patient, duals, horizon)
    sigma = float(duals.patient_duals[patient.index])
    out = []
    for t_final, bucket in enumerate(layers[-1]):
        for dist, (cost, _, _) in bucket.items():
            out.append((cost - sigma, _walk_back(layers, horizon.periods, t_final, dist)))
    out.sort()
    return out


def price_exact(
    patient: Patient,
    duals: DualPrices,
    horizon: Horizon,
    horizon_limit: int = DEFAULT_EXACT_HORIZON_LIMIT,
) -> tuple[Column, float]:
    """Exact minimum-reduced-cost schedule for one patient."""
    best_rc, best_slots = price_exact_candidates(patient, duals, horizon, horizon_limit)[0]
    schedule = PatientSchedule(best_slots)
    col = Column(
        patient=patient.index,
        schedule=schedule,
        cost=_exact_cost(patient, schedule, horizon),
    )
    return col, best_rc


# ---------------------------------------------------------------------------
# Column generation and price-and-branch
# ---------------------------------------------------------------------------


@dataclass
class CgResult:
    lp_value: float
    solution: object  # LpSolution of the final master
    master: Master
    rounds: int
    objective_history: list[float]
    pricer: str


def _heuristic_round(inst: Instance, master: Master, duals: DualPrices, rc_tol: float) -> int:
    """One heuristic pricing round.

    Early masters carry heavily degenerate duals (capacity rows priced at
    zero), under which every patient asks for the same few desirable cells
    and the LP cannot move.  Besides the pure-dual candidate, each patient
    therefore also prices against a working copy of the slot duals
    surcharged on cells claimed earlier in the round, which makes each round
    contribute a coordinated, conflict-light batch of schedules.  Surcharged
    candidates are admitted on their exact reduced cost; pure candidates on
    the pricer's reported one, so the termination test stays the pure
    no-schedule-prices-out condition.
    """
    added = 0
    surcharge = max(0.05, float(np.mean(duals.patient_duals)) / inst.horizon.periods)
    temp = duals.slot_duals.copy()
    for pat in inst.patients:
        col, rc = price_heuristic(pat, duals, inst.horizon)
        if rc < -rc_tol and master.add_column(col):
            added += 1
        guided = DualPrices(duals.patient_duals, temp)
        col2, _ = price_heuristic(pat, guided, inst.horizon)
        if reduced_cost(col2, duals) < -rc_tol and master.add_column(col2):
            added += 1
        for k, slot in enumerate(col2.schedule.slots):
            if slot <= inst.horizon.real_slots:
                temp[k, slot - 1] += surcharge
    return added


def _exact_round(
    inst: Instance,
    master: Master,
    duals: DualPrices,
    rc_tol: float,
    exact_horizon_limit: int,
    columns_per_patient: int,
) -> int:
    added = 0
    for pat in inst.patients:
        taken = 0
        for rc, slots in price_exact_candidates(pat, duals, inst.horizon, exact_horizon_limit):
            if rc >= -rc_tol or taken >= columns_per_patient:
                break
            schedule = PatientSchedule(slots)
            col = Column(
                patient=pat.index,
                schedule=schedule,
                cost=_exact_cost(pat, schedule, inst.horizon),
            )
            if master.add_column(col):
                added += 1
                taken += 1
    return added


def column_generation(
    inst: Instance,
    pricer: str = "heuristic",
    rc_tol: float = DEFAULT_RC_TOL,
    exact_horizon_limit: int = DEFAULT_EXACT_HORIZON_LIMIT,
    columns_per_patient: int = 25,
) -> CgResult:
    """Alternate master solves and per-patient pricing until no schedule
    prices out (reduced cost < -rc_tol).

    With exact pricing every negative final label (up to
    ``columns_per_patient`` per patient and round) joins the pool, and the
    final LP value is a valid lower bound on the integer optimum; heuristic
    pricing adds one schedule per patient and round and yields a heuristic
    bound only.
    """
    if pricer not in ("heuristic", "exact"):
        raise ValueError(f"pricer must be 'heuristic' or 'exact', got {pricer!r}")
    master = Master(inst, rotation_schedule(inst))
    sol = solve_lp(master.lp())
    if not sol.optimal:
        raise SolverError(f"master LP solve failed: {sol.status.value}")
    history = [sol.objective]
    rounds = 0
    while True:
        rounds += 1
        duals = master.dual_prices(sol.duals)
        if pricer == "heuristic":
            added = _heuristic_round(inst, master, duals, rc_tol)
        else:
            added = _exact_round(inst, master, duals, rc_tol, exact_horizon_limit, columns_per_patient)
        if added == 0:
            break
        sol = solve_lp(master.lp(), start=sol.basis)
        if not sol.optimal:
            raise SolverError(f"master LP re-solve failed: {sol.status.value}")
        history.append(sol.objective)
    return CgResult(
        lp_value=sol.objective,
        solution=sol,
        master=master,
        rounds=rounds,
        objective_history=history,
        pricer=pricer,
    )


@dataclass
class SolveResult:
    schedule: PopulationSchedule
    objective: float
    lp_value: float
    columns: int
    cg_rounds: int
    nodes: int
    bnb_status: str
    pricer: str


def solve_schedule(
    inst: Instance,
    pricer: str = "heuristic",
    node_limit: int | None = None,
    rc_tol: float = DEFAULT_RC_TOL,
    exact_horizon_limit: int = DEFAULT_EXACT_HORIZON_LIMIT,
) -> SolveResult:
    """Price-and-branch: column generation, then branch and bound over the
    pooled columns (no pricing inside the tree).

    If the covering relaxation double-covers a patient, the cheaper column
    wins and the other's slots are released.  Should branch and bound find no
    integer point (not reachable with the disjoint rotation seeds), uncovered
    patients fall back to their rotation-policy schedules.
    """
    cg = column_generation(
        inst,
        pricer=pricer,
        rc_tol=rc_tol,
        exact_horizon_limit=exact_horizon_limit,
    )
    master = cg.master
    n_cols = len(master.columns)
    seeds_obj = math.fsum(c.cost for c in master.columns[: inst.population])
    x0 = np.zeros(n_cols)
    x0[: inst.population] = 1.0
    res = branch_and_bound(
        master.lp(), range(n_cols), incumbent=(x0, seeds_obj), node_limit=node_limit
    )
    if res.x is None:
        chosen: dict[int, Column] = {}
    else:
        chosen = {}
        for j in np.flatnonzero(res.x > 0.5):
            col = master.columns[int(j)]
            cur = chosen.get(col.patient)
            if cur is None or col.cost < cur.cost:
                chosen[col.patient] = col
    rotation = rotation_schedule(inst)
    schedules = []
    for i in range(inst.population):
        if i in chosen:
            schedules.append(chosen[i].schedule)
        else:
            schedules.append(rotation.schedules[i])
    population = PopulationSchedule(tuple(schedules))
    report = validate_population_schedule(inst, population)
    if not report.ok:
        raise SolverError(f"emitted schedule failed validation: {report.violations[:3]}")
    evaluation = evaluate_population(inst, population)
    return SolveResult(
        schedule=population,
        objective=evaluation.total,
        lp_value=cg.lp_value,
        columns=n_cols,
        cg_rounds=cg.rounds,
        nodes=res.nodes,
        bnb_status=res.status,
        pricer=pricer,
    )
