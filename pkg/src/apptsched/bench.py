"""Experiment harness: instance generator for the stylized test design
(time-of-day / severity / reliability profiles), suite runner comparing the
cohort policies against the optimizer, and gap reporting.

Every instance has 20 patients, 13 periods, 8 slots per period.  The suite
crosses six time-of-day profiles with seven severity/reliability rows (one
dimension fixed, the other randomly varied) and two preference strengths.
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .colgen import solve_schedule
from .model import Instance, Horizon, Patient, quantize
from .policies import policy_schedule
from .progression import evaluate_population

POPULATION = 20
PERIODS = 13
REAL_SLOTS = 8

STRENGTHS = ("strong", "weak")
TOD_PROFILES = ("I", "II", "III", "IV", "V", "VI")
SEVERITY_PROFILES = ("I", "II", "III", "IV")
RELIABILITY_PROFILES = ("I", "II", "III", "IV")

TOD_PROFILE_COUNTS = {
    "I": (20, 0, 0),
    "II": (16, 2, 2),
    "III": (10, 5, 5),
    "IV": (10, 0, 10),
    "V": (5, 10, 5),
    "VI": (7, 6, 7),
}

# no-show probability per slot, by (strength, time-of-day preference)
NO_SHOW_ROWS = {
    ("strong", "AM"): (0.05, 0.05, 0.05, 0.05, 0.35, 0.35, 0.35, 0.35),
    ("strong", "Noon"): (0.35, 0.35, 0.35, 0.05, 0.05, 0.35, 0.35, 0.35),
    ("strong", "PM"): (0.35, 0.35, 0.35, 0.35, 0.05, 0.05, 0.05, 0.05),
    ("weak", "AM"): (0.05, 0.05, 0.05, 0.05, 0.15, 0.15, 0.15, 0.15),
    ("weak", "Noon"): (0.15, 0.15, 0.15, 0.05, 0.05, 0.15, 0.15, 0.15),
    ("weak", "PM"): (0.15, 0.15, 0.15, 0.15, 0.05, 0.05, 0.05, 0.05),
}

# mild disease keeps control longer; the varied profile draws uniformly
ALPHA_MILD = 0.9
ALPHA_SEVERE = 0.8
ALPHA_VARIED_RANGE = (0.8, 0.9)
SEVERITY_SPLIT = 0.85  # below = severe

MULT_RELIABLE = 0.8
MULT_UNRELIABLE = 1.0
MULT_VARIED_RANGE = (0.8, 1.0)
RELIABILITY_SPLIT = 0.9  # below = reliable

# fractions handed to the cohort builder per profile (None = builder default)
RELIABILITY_COHORT_FRACTIONS = {"II": (3 / 8, 5 / 8), "IV": (0.5, 0.5)}
SEVERITY_COHORT_FRACTIONS = {"II": (5 / 8, 3 / 8), "IV": (5 / 8, 3 / 8)}

# the 7 (severity, reliability) rows crossed with each tod profile
SUITE_ROWS = (
    ("III", "IV"),
    ("II", "IV"),
    ("I", "IV"),
    ("IV", "III"),
    ("IV", "II"),
    ("IV", "I"),
    ("IV", "IV"),
)

POLICY_ORDER = ("rotation", "time", "severity", "reliability", "optimizer")


@dataclass(frozen=True)
class ProfileSpec:
    """One generated instance: profile choices plus a seed."""

    tod_profile: str
    strength: str
    severity_profile: str
    reliability_profile: str
    seed: int

    def __post_init__(self):
        if self.tod_profile not in TOD_PROFILES:
            raise ValueError(f"unknown tod profile {self.tod_profile!r}")
        if self.strength not in STRENGTHS:
            raise ValueError(f"strength must be one of {STRENGTHS}")
        if self.severity_profile not in SEVERITY_PROFILES:
            raise ValueError(f"unknown severity profile {self.severity_profile!r}")
        if self.reliability_profile not in RELIABILITY_PROFILES:
            raise ValueError(f"unknown reliability profile {self.reliability_profile!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    @property
    def instance_id(self) -> str:
        return (
            f"tod{self.tod_profile}-{self.strength}"
            f"-sev{self.severity_profile}-rel{self.reliability_profile}-seed{self.seed}"
        )


def _severity_draw(profile: str, rng: np.random.Generator) -> list[tuple[float, str]]:
    """Per-patient (control probability, class label)."""
    if profile == "I":
        return [(ALPHA_MILD, "mild")] * POPULATION
    if profile == "III":
        return [(ALPHA_SEVERE, "severe")] * POPULATION
    if profile == "II":
        severe_ids = set(rng.permutation(POPULATION)[: POPULATION // 2].tolist())
        return [
            (ALPHA_SEVERE, "severe") if i in severe_ids else (ALPHA_MILD, "mild")
            for i in range(POPULATION)
        ]
    draws = rng.uniform(*ALPHA_VARIED_RANGE, size=POPULATION)
    out = []
    for a in draws:
        alpha = quantize(float(a))
        out.append((alpha, "severe" if alpha < SEVERITY_SPLIT else "mild"))
    return out


def _reliability_draw(profile: str, rng: np.random.Generator) -> list[tuple[float, str]]:
    """Per-patient (no-show multiplier, class label)."""
    if profile == "I":
        return [(MULT_RELIABLE, "reliable")] * POPULATION
    if profile == "III":
        return [(MULT_UNRELIABLE, "unreliable")] * POPULATION
    if profile == "II":
        reliable_ids = set(rng.permutation(POPULATION)[: POPULATION // 2].tolist())
        return [
            (MULT_RELIABLE, "reliable") if i in reliable_ids else (MULT_UNRELIABLE, "unreliable")
            for i in range(POPULATION)
        ]
    draws = rng.uniform(*MULT_VARIED_RANGE, size=POPULATION)
    out = []
    for m in draws:
        mult = quantize(float(m))
        out.append((mult, "reliable" if mult < RELIABILITY_SPLIT else "unreliable"))
    return out


def generate_instance(spec: ProfileSpec) -> Instance:
    """Deterministically generate the instance described by ``spec``.

    Randomness comes from streams split off a seed sequence keyed by every
    profile field plus the seed, so each (spec, seed) pair maps to one
    instance regardless of execution order, and all drawn probabilities are
    quantized to the document precision.
    """
    counts = TOD_PROFILE_COUNTS[spec.tod_profile]
    tods = ["AM"] * counts[0] + ["Noon"] * counts[1] + ["PM"] * counts[2]
    entropy = [
        TOD_PROFILES.index(spec.tod_profile),
        STRENGTHS.index(spec.strength),
        SEVERITY_PROFILES.index(spec.severity_profile),
        RELIABILITY_PROFILES.index(spec.reliability_profile),
        spec.seed,
    ]
    sev_stream, rel_stream = np.random.SeedSequence(entropy).spawn(2)
    severities = _severity_draw(spec.severity_profile, np.random.default_rng(sev_stream))
    reliabilities = _reliability_draw(spec.reliability_profile, np.random.default_rng(rel_stream))
    patients = []
    for i in range(POPULATION):
        alpha, sev_label = severities[i]
        mult, rel_label = reliabilities[i]
        base = NO_SHOW_ROWS[(spec.strength, tods[i])]
        no_show = tuple(quantize(mult * p) for p in base) + (1.0,)
        patients.append(
            Patient(
                index=i,
                control_prob=alpha,
                no_show=no_show,
                labels={"tod": tods[i], "severity": sev_label, "reliability": rel_label},
            )
        )
    return Instance(horizon=Horizon(PERIODS, REAL_SLOTS), patients=tuple(patients))


def applicable_policies(spec: ProfileSpec) -> list[str]:
    """Cohort policies that distinguish anything on this profile: a single
    homogeneous cohort would just replay the rotation policy."""
    out = ["rotation"]
    if spec.tod_profile != "I":
        out.append("time")
    if spec.severity_profile in ("II", "IV"):
        out.append("severity")
    if spec.reliability_profile in ("II", "IV"):
        out.append("reliability")
    return out


def cohort_fractions(spec: ProfileSpec, policy: str) -> tuple[float, ...] | None:
    if policy == "severity":
        return SEVERITY_COHORT_FRACTIONS.get(spec.severity_profile)
    if policy == "reliability":
        return RELIABILITY_COHORT_FRACTIONS.get(spec.reliability_profile)
    return None


@dataclass(frozen=True)
class SuiteRow:
    instance_id: str
    tod_profile: str
    strength: str
    severity_profile: str
    reliability_profile: str
    seed: int
    policy: str
    z: float
    z_star: float
    gap_pct: float
    solve_ms: float


@dataclass
class SuiteResult:
    rows: list[SuiteRow]
    failures: list[tuple[str, str]] = field(default_factory=list)  # (instance_id, error)


def run_instance(
    spec: ProfileSpec, pricer: str = "heuristic", node_limit: int | None = 50_000
) -> list[SuiteRow]:
    """All policy rows plus the optimizer row for one instance."""
    inst = generate_instance(spec)
    t0 = time.perf_counter()
    solved = solve_schedule(inst, pricer=pricer, node_limit=node_limit)
    opt_ms = (time.perf_counter() - t0) * 1000.0
    z_star = solved.objective
    rows = []
    for policy in applicable_policies(spec):
        t0 = time.perf_counter()
        sched = policy_schedule(inst, policy, fractions=cohort_fractions(spec, policy))
        z = evaluate_population(inst, sched).total
        ms = (time.perf_counter() - t0) * 1000.0
        rows.append(
            SuiteRow(
                instance_id=spec.instance_id,
                tod_profile=spec.tod_profile,
                strength=spec.strength,
                severity_profile=spec.severity_profile,
                reliability_profile=spec.reliability_profile,
                seed=spec.seed,
                policy=policy,
                z=z,
                z_star=z_star,
                gap_pct=100.0 * (z - z_star) / z_star,
                solve_ms=ms,
            )
        )
    rows.append(
        SuiteRow(
            instance_id=spec.instance_id,
            tod_profile=spec.tod_profile,
            strength=spec.strength,
            severity_profile=spec.severity_profile,
            reliability_profile=spec.reliability_profile,
            seed=spec.seed,
            policy="optimizer",
            z=z_star,
            z_star=z_star,
            gap_pct=0.0,
            solve_ms=opt_ms,
        )
    )
    return rows


def suite_specs(
    seeds,
    tod_profiles=TOD_PROFILES,
    strengths=STRENGTHS,
) -> list[ProfileSpec]:
    return [
        ProfileSpec(tod, strength, sev, rel, seed)
        for tod in tod_profiles
        for strength in strengths
        for sev, rel in SUITE_ROWS
        for seed in seeds
    ]


def _run_instance_task(args):
    spec, pricer, node_limit = args
    try:
        return spec.instance_id, run_instance(spec, pricer, node_limit), None
    except Exception as exc:  # noqa: BLE001 - a failed instance must not kill the suite
        return spec.instance_id, [], f"{type(exc).__name__}: {exc}"


def run_suite(
    seeds,
    pricer: str = "heuristic",
    jobs: int = 1,
    tod_profiles=TOD_PROFILES,
    strengths=STRENGTHS,
    node_limit: int | None = 50_000,
) -> SuiteResult:
    """Run the full profile cross for every seed.

    Failures are recorded per instance and the suite continues.  Row order is
    fixed by the (profile, strength, row, seed, policy) sort, independent of
    execution order or job count.
    """
    specs = suite_specs(seeds, tod_profiles, strengths)
    tasks = [(spec, pricer, node_limit) for spec in specs]
    if jobs > 1:
        with get_context("fork").Pool(jobs) as pool:
            outcomes = pool.map(_run_instance_task, tasks)
    else:
        outcomes = [_run_instance_task(t) for t in tasks]
    result = SuiteResult(rows=[])
    by_id = {}
    for instance_id, rows, error in outcomes:
        if error is not None:
            result.failures.append((instance_id, error))
        by_id[instance_id] = rows
    for spec in specs:  # canonical order
        for row in sorted(
            by_id.get(spec.instance_id, ()), key=lambda r: POLICY_ORDER.index(r.policy)
        ):
            result.rows.append(row)
    return result


CSV_COLUMNS = (
    "instance_id",
    "tod_profile",
    "strength",
    "severity_profile",
    "reliability_profile",
    "seed",
    "policy",
    "z",
    "z_star",
    "gap_pct",
    "solve_ms",
)


@dataclass
class Report:
    csv_text: str
    summary_text: str
    plot_series: list[dict]


def mean_gaps(rows) -> dict[tuple[str, str, str], float]:
    """Mean gap per (tod_profile, strength, policy), optimizer rows excluded."""
    acc: dict[tuple[str, str, str], list[float]] = {}
    for r in rows:
        if r.policy == "optimizer":
            continue
        acc.setdefault((r.tod_profile, r.strength, r.policy), []).append(r.gap_pct)
    return {key: sum(v) / len(v) for key, v in acc.items()}


def report(rows) -> Report:
    """CSV + aggregate summary + per-profile plot series for suite rows."""
    if not rows:
        raise ValueError("no rows to report")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.instance_id,
                r.tod_profile,
                r.strength,
                r.severity_profile,
                r.reliability_profile,
                r.seed,
                r.policy,
                f"{r.z:.10g}",
                f"{r.z_star:.10g}",
                f"{r.gap_pct:.4f}",
                f"{r.solve_ms:.1f}",
            ]
        )
    gaps = mean_gaps(rows)
    lines = ["mean gap %% by (tod profile, strength, policy)"]
    series = []
    for strength in STRENGTHS:
        for policy in POLICY_ORDER[:-1]:
            points = [
                (tod, gaps[(tod, strength, policy)])
                for tod in TOD_PROFILES
                if (tod, strength, policy) in gaps
            ]
            if not points:
                continue
            for tod, gap in points:
                lines.append(f"  {tod:>3} {strength:<6} {policy:<11} {gap:7.2f}%")
                series.append(
                    {
                        "strength": strength,
                        "policy": policy,
                        "profile": tod,
                        "mean_gap_pct": round(gap, 4),
                    }
                )
    return Report(csv_text=buf.getvalue(), summary_text="\n".join(lines) + "\n", plot_series=series)
