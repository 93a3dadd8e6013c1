"""Command-line interface.

Exit codes: 0 success, 2 validation failure (bad documents, invariant
violations, infeasible schedules), 3 solver failure.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from . import bench
from ._backend import backend_name
from .colgen import SolverError, solve_schedule
from .model import (
    InstanceError,
    ScheduleError,
    load_instance,
    load_population_schedule,
    save_instance,
    save_population_schedule,
    validate_population_schedule,
)
from .policies import CohortError, POLICY_NAMES, policy_schedule
from .progression import evaluate_population, simulate_population

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str):
    Path(path).write_text(text, encoding="utf-8")


def _load_pair(instance_path: str, schedule_path: str):
    inst = load_instance(_read(instance_path))
    _, sched = load_population_schedule(_read(schedule_path))
    return inst, sched


def _parse_fractions(text: str) -> tuple[float, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "/" in part:
            num, den = part.split("/", 1)
            out.append(float(num) / float(den))
        else:
            out.append(float(part))
    return tuple(out)


def cmd_generate(args) -> int:
    tod, sev, rel = (args.profile.split(":") + ["IV", "IV"])[:3]
    spec = bench.ProfileSpec(
        tod_profile=tod,
        strength=args.strength,
        severity_profile=sev,
        reliability_profile=rel,
        seed=args.seed,
    )
    text = save_instance(bench.generate_instance(spec))
    if args.out:
        _write(args.out, text)
        print(f"{spec.instance_id} -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst, sched = _load_pair(args.instance, args.schedule)
    report = validate_population_schedule(inst, sched)
    if not report.ok:
        for v in report.violations[:20]:
            print(f"violation: {v.kind} period={v.period} slot={v.slot} patients={v.patients}")
        return EXIT_VALIDATION
    result = evaluate_population(inst, sched)
    print(json.dumps({"z": result.total, "per_patient": list(result.per_patient)}, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst, sched = _load_pair(args.instance, args.schedule)
    result = simulate_population(inst, sched, trials=args.trials, seed=args.seed, workers=args.workers)
    print(
        json.dumps(
            {
                "mean": result.mean,
                "halfwidth95": result.halfwidth,
                "trials": result.trials,
                "workers": result.workers,
                "seed": result.seed,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(_read(args.instance))
    t0 = time.perf_counter()
    result = solve_schedule(inst, pricer=args.pricer, node_limit=args.node_limit)
    elapsed = time.perf_counter() - t0
    if args.log_iterations:
        print(
            f"columns={result.columns} cg_rounds={result.cg_rounds} "
            f"bnb_nodes={result.nodes} bnb_status={result.bnb_status} "
            f"lp_value={result.lp_value:.6f} backend={backend_name()}"
        )
    text = save_population_schedule(result.schedule, instance_id=Path(args.instance).stem)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"z_star={result.objective:.10g} ({elapsed:.2f}s)")
    return EXIT_OK


def cmd_policy(args) -> int:
    inst = load_instance(_read(args.instance))
    fractions = _parse_fractions(args.fractions) if args.fractions else None
    sched = policy_schedule(inst, args.policy, fractions=fractions)
    z = evaluate_population(inst, sched).total
    text = save_population_schedule(sched, instance_id=Path(args.instance).stem)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"z={z:.10g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",")]
    tods = args.tod.split(",") if args.tod else bench.TOD_PROFILES
    strengths = args.strength.split(",") if args.strength else bench.STRENGTHS
    result = bench.run_suite(
        seeds,
        pricer=args.pricer,
        jobs=args.jobs,
        tod_profiles=tods,
        strengths=strengths,
        node_limit=args.node_limit,
    )
    for instance_id, error in result.failures:
        print(f"FAILED {instance_id}: {error}", file=sys.stderr)
    rep = bench.report(result.rows)
    _write(args.out, rep.csv_text)
    if args.plot_data:
        _write(args.plot_data, json.dumps(rep.plot_series, indent=2) + "\n")
    print(rep.summary_text, end="")
    print(f"{len(result.rows)} rows -> {args.out}")
    return EXIT_SOLVER if result.failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apptsched",
        description="Multi-period appointment scheduling under no-shows and disease progression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a test instance")
    p.add_argument("--profile", required=True, help="TOD:SEV:REL profile triple, e.g. III:IV:II")
    p.add_argument("--strength", choices=bench.STRENGTHS, default="strong")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="exact evaluation of a schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte Carlo evaluation of a schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="optimization-based schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--pricer", choices=("heuristic", "exact"), default="heuristic")
    p.add_argument("--out", help="schedule output path (default: stdout)")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--log-iterations", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("policy", help="cohort-policy schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", choices=POLICY_NAMES, required=True)
    p.add_argument("--fractions", help="per-cohort slot fractions, e.g. 1/2,1/4,1/4")
    p.add_argument("--out", help="schedule output path (default: stdout)")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("compare", help="run the policy-vs-optimizer suite")
    p.add_argument("--seeds", required=True, help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--plot-data", help="optional JSON path for plot series")
    p.add_argument("--pricer", choices=("heuristic", "exact"), default="heuristic")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tod", help="restrict to tod profiles, e.g. I,VI")
    p.add_argument("--strength", help="restrict to strengths, e.g. strong")
    p.add_argument("--node-limit", type=int, default=50_000)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, ScheduleError, CohortError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
