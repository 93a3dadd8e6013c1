import math

import numpy as np
import pytest

from apptsched.lp import (
    GE,
    LE,
    BnbResult,
    LinearProgram,
    LpStatus,
    branch_and_bound,
    solve_lp,
)

from oracles import brute_force_binary_optimum, lagrangian_dual_value


def lp(objective, rows, upper=None):
    """rows: list of (coeffs, sense, rhs)."""
    objective = np.asarray(objective, dtype=float)
    n = objective.shape[0]
    if rows:
        constraints = np.array([r[0] for r in rows], dtype=float)
        senses = tuple(r[1] for r in rows)
        rhs = np.array([r[2] for r in rows], dtype=float)
    else:
        constraints = np.zeros((0, n))
        senses = ()
        rhs = np.zeros(0)
    if upper is None:
        upper = np.full(n, np.inf)
    return LinearProgram(objective, constraints, senses, rhs, np.asarray(upper, dtype=float))


def random_feasible_lp(rng, n=None, m=None, upper_prob=0.8):
    """Feasible bounded LP built around a known interior box point."""
    n = int(n if n is not None else rng.integers(1, 7))
    m = int(m if m is not None else rng.integers(0, 7))
    c = rng.uniform(-2, 3, n).round(3)
    upper = np.where(rng.random(n) < upper_prob, rng.uniform(0.5, 8.0, n), np.inf)
    # negative-cost variables need a finite box for boundedness
    for j in range(n):
        if c[j] < 0 and not np.isfinite(upper[j]):
            upper[j] = float(rng.uniform(1.0, 9.0))
    x0 = np.array([rng.uniform(0, min(u, 5.0)) for u in upper])
    rows = []
    for _ in range(m):
        a = rng.uniform(-3, 3, n).round(3)
        slack = float(rng.uniform(0.0, 4.0))
        if rng.random() < 0.5:
            rows.append((a, LE, float(a @ x0) + slack))
        else:
            rows.append((a, GE, float(a @ x0) - slack))
    return lp(c, rows, upper)


class TestToyPrograms:
    def test_min_x_above_one(self):
        sol = solve_lp(lp([1.0], [(np.array([1.0]), GE, 1.0)], upper=[10.0]))
        assert sol.optimal
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.objective == pytest.approx(1.0, abs=1e-9)
        assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)

    def test_empty_constraints_nonneg_objective(self):
        sol = solve_lp(lp([2.0, 0.5], []))
        assert sol.optimal
        assert np.allclose(sol.x, 0.0)
        assert sol.objective == 0.0

    def test_negative_cost_runs_to_upper_bound(self):
        sol = solve_lp(lp([-1.0], [], upper=[3.0]))
        assert sol.optimal
        assert sol.x[0] == pytest.approx(3.0, abs=1e-12)

    def test_unbounded_detected(self):
        sol = solve_lp(lp([-1.0], [(np.array([-1.0]), LE, 0.0)]))
        assert sol.status is LpStatus.UNBOUNDED

    def test_infeasible_detected(self):
        program = lp(
            [1.0],
            [(np.array([1.0]), GE, 5.0), (np.array([1.0]), LE, 1.0)],
            upper=[10.0],
        )
        assert solve_lp(program).status is LpStatus.INFEASIBLE

    def test_infeasible_by_bounds(self):
        program = lp([0.0], [(np.array([1.0]), GE, 2.0)], upper=[1.0])
        assert solve_lp(program).status is LpStatus.INFEASIBLE

    def test_two_by_two_assignment_toy(self):
        # patients x slots: costs 1,3 / 2,1; covering GE rows, capacity LE rows
        c = [1.0, 3.0, 2.0, 1.0]
        rows = [
            ([1, 1, 0, 0], GE, 1.0),
            ([0, 0, 1, 1], GE, 1.0),
            ([1, 0, 1, 0], LE, 1.0),
            ([0, 1, 0, 1], LE, 1.0),
        ]
        sol = solve_lp(lp(c, rows, upper=[1.0] * 4))
        assert sol.optimal
        assert sol.objective == pytest.approx(2.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.x[3] == pytest.approx(1.0, abs=1e-9)


class TestAgainstScipy:
    def test_objective_matches_highs(self, rng):
        scipy_opt = pytest.importorskip("scipy.optimize")
        for _ in range(120):
            program = random_feasible_lp(rng)
            sol = solve_lp(program)
            a_ub, b_ub, a_lb, b_lb = [], [], [], []
            for row, sense, rhs_val in zip(
                program.constraints, program.senses, program.rhs
            ):
                if sense == LE:
                    a_ub.append(row)
                    b_ub.append(rhs_val)
                else:
                    a_ub.append(-row)
                    b_ub.append(-rhs_val)
            ref = scipy_opt.linprog(
                program.objective,
                A_ub=np.array(a_ub) if a_ub else None,
                b_ub=np.array(b_ub) if b_ub else None,
                bounds=[(0.0, u if np.isfinite(u) else None) for u in program.upper],
                method="highs",
            )
            assert sol.optimal == ref.success
            if ref.success:
                assert sol.objective == pytest.approx(ref.fun, abs=1e-6)


class TestSolutionQuality:
    def test_primal_feasibility_and_duality(self, rng):
        for _ in range(200):
            program = random_feasible_lp(rng)
            sol = solve_lp(program)
            assert sol.optimal, "constructed feasible+bounded"
            lhs = program.constraints @ sol.x
            for i, sense in enumerate(program.senses):
                if sense == GE:
                    assert lhs[i] >= program.rhs[i] - 1e-7
                    assert sol.duals[i] >= -1e-9
                else:
                    assert lhs[i] <= program.rhs[i] + 1e-7
                    assert sol.duals[i] <= 1e-9
            assert np.all(sol.x >= -1e-9)
            assert np.all(sol.x <= program.upper + 1e-9)
            # weak duality via the Lagrangian bound; strong duality at optimum
            dual_value = lagrangian_dual_value(program, sol)
            assert dual_value <= sol.objective + 1e-7
            assert dual_value == pytest.approx(sol.objective, abs=1e-6)

    def test_complementary_slackness(self, rng):
        for _ in range(100):
            program = random_feasible_lp(rng)
            sol = solve_lp(program)
            lhs = program.constraints @ sol.x
            for i in range(program.n_rows):
                slack = lhs[i] - program.rhs[i]
                assert abs(sol.duals[i] * slack) <= 1e-6

    def test_dominates_random_feasible_points(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 5))
            upper = rng.uniform(0.5, 4.0, n)
            x0 = rng.uniform(0, upper)
            rows = []
            for _ in range(int(rng.integers(1, 5))):
                a = rng.uniform(-2, 2, n)
                rows.append((a, LE, float(a @ x0) + float(rng.uniform(0.1, 2.0))))
            program = lp(rng.uniform(-1, 2, n), rows, upper)
            sol = solve_lp(program)
            assert sol.optimal
            for _ in range(20):
                cand = rng.uniform(0, upper)
                lhs = program.constraints @ cand
                if all(lhs[i] <= program.rhs[i] + 1e-12 for i in range(program.n_rows)):
                    assert sol.objective <= float(program.objective @ cand) + 1e-7

    def test_warm_start_after_adding_columns(self, rng):
        for _ in range(40):
            program = random_feasible_lp(rng, n=4, m=4)
            sol = solve_lp(program)
            if not sol.optimal:
                continue
            extra = rng.uniform(-1, 1, (program.n_rows, 2))
            wider = LinearProgram(
                np.concatenate([program.objective, rng.uniform(-0.5, 1.5, 2)]),
                np.hstack([program.constraints, extra]),
                program.senses,
                program.rhs,
                np.concatenate([program.upper, rng.uniform(0.5, 3.0, 2)]),
            )
            warm = solve_lp(wider, start=sol.basis)
            cold = solve_lp(wider)
            assert warm.status == cold.status
            if cold.optimal:
                assert warm.objective == pytest.approx(cold.objective, abs=1e-7)

    def test_warm_start_after_bound_tightening(self, rng):
        # emulate a branching step: fix one variable to 0 or 1
        for _ in range(60):
            program = random_feasible_lp(rng, n=5, m=5)
            program.upper[:] = np.minimum(program.upper, 1.0)
            sol = solve_lp(program)
            if not sol.optimal:
                continue
            j = int(rng.integers(0, program.n_cols))
            fixed = LinearProgram(
                program.objective.copy(),
                np.vstack([program.constraints, np.eye(program.n_cols)[j]]),
                program.senses + (GE if rng.random() < 0.5 else LE,),
                np.append(program.rhs, 1.0 if rng.random() < 0.5 else 0.0),
                program.upper.copy(),
            )
            cold = solve_lp(fixed)
            warm = solve_lp(fixed)  # same path; sanity determinism
            assert cold.status == warm.status
            if cold.optimal:
                assert warm.objective == pytest.approx(cold.objective, abs=1e-9)


class TestBranchAndBound:
    def test_integral_relaxation_returns_immediately(self):
        program = lp(
            [1.0, 2.0],
            [([1, 0], GE, 1.0), ([0, 1], GE, 1.0)],
            upper=[1.0, 1.0],
        )
        res = branch_and_bound(program, [0, 1])
        assert res.status == "optimal"
        assert res.nodes == 0
        assert res.objective == pytest.approx(3.0, abs=1e-9)

    def test_three_variable_set_partitioning_toy(self):
        # fractional relaxation: pairwise covering forces 0.5s
        program = lp(
            [1.0, 1.0, 1.0],
            [
                ([1, 1, 0], GE, 1.0),
                ([1, 0, 1], GE, 1.0),
                ([0, 1, 1], GE, 1.0),
            ],
            upper=[1.0] * 3,
        )
        relax = solve_lp(program)
        assert relax.objective == pytest.approx(1.5, abs=1e-9)
        res = branch_and_bound(program, [0, 1, 2])
        assert res.status == "optimal"
        assert res.objective == pytest.approx(2.0, abs=1e-9)
        assert res.objective == pytest.approx(brute_force_binary_optimum(program, [0, 1, 2]))

    def test_infeasible_after_fixing_pruned(self):
        # x0 + x1 = 1 (as two inequalities), x0 = x1 forced by bounds -> only
        # fractional relaxation; integer infeasible
        program = lp(
            [1.0, 1.0],
            [
                ([1, 1], GE, 1.0),
                ([1, 1], LE, 1.0),
                ([1, -1], GE, 0.0),
                ([1, -1], LE, 0.0),
            ],
            upper=[1.0, 1.0],
        )
        res = branch_and_bound(program, [0, 1])
        assert res.status == "no_integer_solution"

    def test_matches_brute_force_on_random_binaries(self, rng):
        solved = 0
        for _ in range(150):
            n = int(rng.integers(2, 9))
            m = int(rng.integers(1, 6))
            constraints = rng.integers(-2, 3, (m, n)).astype(float)
            senses = tuple(LE if rng.random() < 0.5 else GE for _ in range(m))
            # rhs keyed to a random binary point so feasibility is common
            x0 = rng.integers(0, 2, n).astype(float)
            rhs = constraints @ x0 + np.where(
                [s == LE for s in senses], rng.uniform(0, 1.5, m), -rng.uniform(0, 1.5, m)
            )
            program = lp(rng.uniform(-2, 2, n).round(3), list(zip(constraints, senses, rhs)), upper=[1.0] * n)
            oracle = brute_force_binary_optimum(program, range(n))
            res = branch_and_bound(program, range(n))
            if oracle is None:
                assert res.status in ("no_integer_solution", "infeasible")
            else:
                assert res.status == "optimal"
                assert res.objective == pytest.approx(oracle, abs=1e-8)
                assert res.bound <= res.objective + 1e-9
                assert res.root_objective <= res.objective + 1e-9
                solved += 1
        assert solved > 50

    def test_incumbent_only_helps(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 7))
            program = lp(
                rng.uniform(0.1, 2, n),
                [(np.ones(n), GE, float(rng.integers(1, n + 1)))],
                upper=[1.0] * n,
            )
            plain = branch_and_bound(program, range(n))
            x0 = np.ones(n)
            seeded = branch_and_bound(
                program, range(n), incumbent=(x0, float(program.objective @ x0))
            )
            assert plain.status == seeded.status == "optimal"
            assert seeded.objective == pytest.approx(plain.objective, abs=1e-9)

    def test_node_limit_reports_bound(self, rng):
        program = lp(
            np.ones(6),
            [
                ([1, 1, 0, 0, 0, 0], GE, 1.0),
                ([0, 1, 1, 0, 0, 0], GE, 1.0),
                ([0, 0, 1, 1, 0, 0], GE, 1.0),
                ([0, 0, 0, 1, 1, 0], GE, 1.0),
                ([0, 0, 0, 0, 1, 1], GE, 1.0),
                ([1, 0, 0, 0, 0, 1], GE, 1.0),
            ],
            upper=[1.0] * 6,
        )
        res = branch_and_bound(program, range(6), node_limit=0)
        assert res.status in ("node_limit", "optimal")
        if res.status == "node_limit":
            assert res.bound <= 3.0 + 1e-9


class TestDeterminism:
    def test_repeat_solves_identical(self, rng):
        for _ in range(20):
            program = random_feasible_lp(rng)
            a = solve_lp(program)
            b = solve_lp(program)
            assert a.status == b.status
            if a.optimal:
                assert np.array_equal(a.x, b.x)
                assert np.array_equal(a.duals, b.duals)
