"""Multi-period appointment scheduling for a fixed patient population under
slot-dependent no-show probabilities and two-state disease progression.

Submodules: ``model`` (domain types and documents), ``progression`` (exact
and Monte Carlo schedule evaluation), ``policies`` (rotation and cohort
policies), ``lp`` (simplex + branch and bound), ``colgen`` (the
optimization-based scheduler), ``bench`` (instance generator and suite
runner).
"""

from ._backend import backend_name
from .model import (
    Horizon,
    Instance,
    InstanceError,
    Patient,
    PatientSchedule,
    PopulationSchedule,
    ScheduleError,
    load_instance,
    load_population_schedule,
    save_instance,
    save_population_schedule,
    validate_population_schedule,
)
from .progression import (
    EvaluationResult,
    IntervalDistribution,
    evaluate_population,
    expected_uncontrolled,
    perfect_adherence_arc_cost,
    simulate_population,
)
from .policies import (
    Cohort,
    CohortStrategy,
    allocate_slots,
    build_cohorts,
    cohort_schedule,
    policy_schedule,
    rotation_schedule,
    slot_reversing_schedule,
)
from .colgen import Column, DualPrices, column_generation, price_exact, price_heuristic, solve_schedule
from .bench import ProfileSpec, generate_instance, run_suite

__version__ = "0.1.0"

__all__ = [
    "Horizon",
    "Instance",
    "InstanceError",
    "Patient",
    "PatientSchedule",
    "PopulationSchedule",
    "ScheduleError",
    "load_instance",
    "load_population_schedule",
    "save_instance",
    "save_population_schedule",
    "validate_population_schedule",
    "EvaluationResult",
    "IntervalDistribution",
    "evaluate_population",
    "expected_uncontrolled",
    "perfect_adherence_arc_cost",
    "simulate_population",
    "Cohort",
    "CohortStrategy",
    "allocate_slots",
    "build_cohorts",
    "cohort_schedule",
    "policy_schedule",
    "rotation_schedule",
    "slot_reversing_schedule",
    "Column",
    "DualPrices",
    "column_generation",
    "price_exact",
    "price_heuristic",
    "solve_schedule",
    "ProfileSpec",
    "generate_instance",
    "run_suite",
    "backend_name",
    "__version__",
]
