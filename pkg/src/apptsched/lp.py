"""Dense LP engine: bounded-variable revised simplex with a dual-simplex
re-solve path, plus a branch-and-bound shell over binary variables.

Built for the small master problems this package produces (at most a few
hundred rows); everything is dense numpy with an explicit basis inverse,
refactorized every 50 pivots.  Pivoting is deterministic: Dantzig's rule with
a switch to Bland's rule after 5*(rows+cols) degenerate pivots.
"""

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

GE = ">="
LE = "<="

_FEAS_TOL = 1e-9
_RC_TOL = 1e-9
_PIVOT_TOL = 1e-10
_DEGEN_TOL = 1e-11
_REFACTOR_EVERY = 50
DEFAULT_ITERATION_LIMIT = 1_000_000


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LinearProgram:
    """min objective @ x  s.t.  constraints x (sense) rhs,  0 <= x <= upper.

    ``senses`` entries are the module constants GE / LE.  ``upper`` may hold
    ``inf`` for unbounded-above variables.
    """

    objective: np.ndarray
    constraints: np.ndarray
    senses: tuple[str, ...]
    rhs: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        self.constraints = np.asarray(self.constraints, dtype=np.float64)
        self.rhs = np.asarray(self.rhs, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.constraints.ndim != 2:
            raise ValueError("constraint matrix must be 2-D")
        m, n = self.constraints.shape
        if self.objective.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("objective/bounds length must match columns")
        if self.rhs.shape != (m,) or len(self.senses) != m:
            raise ValueError("rhs/senses length must match rows")
        if any(s not in (GE, LE) for s in self.senses):
            raise ValueError(f"senses must be {GE!r} or {LE!r}")
        for name, arr in (
            ("objective", self.objective),
            ("constraints", self.constraints),
            ("rhs", self.rhs),
        ):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(np.isnan(self.upper)) or np.any(self.upper < 0):
            raise ValueError("upper bounds must be >= 0 (inf allowed)")

    @property
    def n_rows(self) -> int:
        return self.constraints.shape[0]

    @property
    def n_cols(self) -> int:
        return self.constraints.shape[1]


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0
    basis: tuple | None = None  # opaque warm-start token

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


# variable status markers
_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


class _Simplex:
    """Bounded-variable revised simplex over the extended system
    [A | slacks | +I | -I] z = b.

    Slacks carry coefficient -1 on GE rows and +1 on LE rows.  The identity
    pairs are a persistent artificial pool, pinned to [0, 0] outside phase 1,
    so the column space never changes and basis tokens stay valid across
    re-solves.  Structural columns may be appended between solves.
    """

    def __init__(self, lp: LinearProgram, iteration_limit: int = DEFAULT_ITERATION_LIMIT):
        m, n = lp.n_rows, lp.n_cols
        self.m = m
        self.n_struct = n
        slack = np.zeros((m, m))
        for i, s in enumerate(lp.senses):
            slack[i, i] = -1.0 if s == GE else 1.0
        eye = np.eye(m)
        self.A = np.hstack([lp.constraints, slack, eye, -eye])
        self.b = lp.rhs.copy()
        self.c = np.concatenate([lp.objective, np.zeros(3 * m)])
        self.lb = np.zeros(n + 3 * m)
        self.ub = np.concatenate([lp.upper.copy(), np.full(m, np.inf), np.zeros(2 * m)])
        self.iteration_limit = iteration_limit
        self.iterations = 0
        self.basis = np.arange(n, n + m)
        self.status_ = np.full(n + 3 * m, _AT_LOWER, dtype=np.int8)
        self.status_[self.basis] = _BASIC
        self.xb = np.zeros(m)
        self.binv = np.eye(m)
        self._pivots_since_refactor = 0

    # -- layout helpers ------------------------------------------------------

    @property
    def n_total(self) -> int:
        return self.A.shape[1]

    def _slack(self, row: int) -> int:
        return self.n_struct + row

    def _artificial(self, row: int, positive: bool) -> int:
        return self.n_struct + self.m + (0 if positive else self.m) + row

    def add_columns(self, cols: np.ndarray, costs: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """Append structural columns (nonbasic at lower); returns their indices."""
        k = cols.shape[1]
        at = self.n_struct
        self.A = np.hstack([self.A[:, :at], cols, self.A[:, at:]])
        self.c = np.concatenate([self.c[:at], costs, self.c[at:]])
        self.lb = np.concatenate([self.lb[:at], np.zeros(k), self.lb[at:]])
        self.ub = np.concatenate([self.ub[:at], upper, self.ub[at:]])
        self.status_ = np.concatenate(
            [self.status_[:at], np.full(k, _AT_LOWER, dtype=np.int8), self.status_[at:]]
        )
        self.basis = np.where(self.basis >= at, self.basis + k, self.basis)
        self.n_struct += k
        return np.arange(at, at + k)

    # -- numerical state -----------------------------------------------------

    def _nonbasic_values(self) -> np.ndarray:
        vals = np.where(self.status_ == _AT_UPPER, self.ub, self.lb)
        vals[self.status_ == _BASIC] = 0.0
        return vals

    def _refactor(self) -> bool:
        if self.m == 0:
            self._pivots_since_refactor = 0
            return True
        try:
            self.binv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError:
            return False
        self._recompute_xb()
        self._pivots_since_refactor = 0
        return True

    def _recompute_xb(self):
        rhs = self.b - self.A @ self._nonbasic_values()
        self.xb = self.binv @ rhs

    def _update_binv(self, d: np.ndarray, row: int):
        piv = self.binv[row] / d[row]
        self.binv = self.binv - np.outer(d, piv)
        self.binv[row] = piv
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= _REFACTOR_EVERY:
            self._refactor()

    def _duals(self, costs: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        return costs[self.basis] @ self.binv

    def _normalize_statuses(self):
        """Re-park nonbasic variables after bound edits."""
        nonbasic = self.status_ != _BASIC
        bad_upper = nonbasic & (self.status_ == _AT_UPPER) & ~np.isfinite(self.ub)
        self.status_[bad_upper] = _AT_LOWER

    def primal_feasible(self) -> bool:
        lo = self.lb[self.basis] - self.xb
        hi = self.xb - self.ub[self.basis]
        return bool(np.all(lo <= _FEAS_TOL) and np.all(hi <= _FEAS_TOL))

    # -- primal simplex --------------------------------------------------------

    def _primal(self, costs: np.ndarray) -> LpStatus:
        degenerate = 0
        bland_after = 5 * (self.m + self.n_total)
        while True:
            if self.iterations >= self.iteration_limit:
                return LpStatus.ITERATION_LIMIT
            self.iterations += 1
            y = self._duals(costs)
            rc = costs - y @ self.A
            free = self.lb < self.ub
            cand_lo = (self.status_ == _AT_LOWER) & free & (rc < -_RC_TOL)
            cand_up = (self.status_ == _AT_UPPER) & free & (rc > _RC_TOL)
            eligible = np.flatnonzero(cand_lo | cand_up)
            if eligible.size == 0:
                return LpStatus.OPTIMAL
            bland = degenerate > bland_after
            if bland:
                enter = int(eligible[0])
            else:
                enter = int(eligible[np.argmax(np.abs(rc[eligible]))])
            from_lower = self.status_[enter] == _AT_LOWER
            sgn = 1.0 if from_lower else -1.0
            d = self.binv @ self.A[:, enter]

            # ratio test: largest step before a basic variable (or the
            # entering variable itself) hits a bound
            own_range = self.ub[enter] - self.lb[enter]
            leave_row = -1
            leave_to_upper = False
            if self.m:
                coef = sgn * d
                lb_b = self.lb[self.basis]
                ub_b = self.ub[self.basis]
                ratios = np.full(self.m, np.inf)
                pos = coef > _PIVOT_TOL
                neg = (coef < -_PIVOT_TOL) & np.isfinite(ub_b)
                ratios[pos] = (self.xb[pos] - lb_b[pos]) / coef[pos]
                ratios[neg] = (ub_b[neg] - self.xb[neg]) / (-coef[neg])
                np.maximum(ratios, 0.0, out=ratios)
                min_ratio = float(ratios.min())
                if min_ratio < own_range - 1e-12:
                    ties = np.flatnonzero(ratios <= min_ratio + 1e-12)
                    if bland:
                        leave_row = int(ties[np.argmin(self.basis[ties])])
                    else:
                        leave_row = int(ties[np.argmax(np.abs(d[ties]))])
                    leave_to_upper = bool(neg[leave_row])
                    best_t = ratios[leave_row]
                else:
                    best_t = own_range
            else:
                best_t = own_range
            if leave_row < 0 and not np.isfinite(best_t):
                return LpStatus.UNBOUNDED
            step = max(float(best_t), 0.0)
            if step < _DEGEN_TOL:
                degenerate += 1
            if self.m:
                self.xb -= sgn * step * d
            if leave_row < 0:
                self.status_[enter] = _AT_UPPER if from_lower else _AT_LOWER
                continue
            leaving = self.basis[leave_row]
            self.status_[leaving] = _AT_UPPER if leave_to_upper else _AT_LOWER
            enter_val = (self.lb[enter] + step) if from_lower else (self.ub[enter] - step)
            self.basis[leave_row] = enter
            self.status_[enter] = _BASIC
            self.xb[leave_row] = enter_val
            self._update_binv(d, leave_row)

    def solve_from_scratch(self) -> LpStatus:
        """Slack/artificial starting basis, phase 1 if needed, then phase 2."""
        self.iterations = 0
        self.status_[:] = _AT_LOWER
        self.ub[self.n_struct + self.m :] = 0.0  # re-pin the artificial pool
        self.basis = np.empty(self.m, dtype=np.int64)
        resid = self.b - self.A[:, : self.n_struct] @ self.lb[: self.n_struct]
        need_phase1 = False
        for i in range(self.m):
            slack_coef = self.A[i, self._slack(i)]
            slack_val = resid[i] * slack_coef  # +-1 diagonal, so this inverts
            if slack_val >= 0.0:
                self.basis[i] = self._slack(i)
            else:
                art = self._artificial(i, positive=resid[i] > 0)
                self.ub[art] = np.inf
                self.basis[i] = art
                need_phase1 = True
        self.status_[self.basis] = _BASIC
        if not self._refactor():
            return LpStatus.INFEASIBLE
        if need_phase1:
            phase1 = np.zeros(self.n_total)
            phase1[self.n_struct + self.m :] = 1.0
            status = self._primal(phase1)
            if status is LpStatus.ITERATION_LIMIT:
                return status
            if status is not LpStatus.OPTIMAL or float(phase1 @ self._full_x()) > 1e-7:
                return LpStatus.INFEASIBLE
            self.ub[self.n_struct + self.m :] = 0.0
            self._normalize_statuses()
            self._recompute_xb()
        return self._primal(self.c)

    def resume_primal(self) -> LpStatus:
        """Phase 2 from the current basis (requires primal feasibility)."""
        if not self._refactor():
            return LpStatus.INFEASIBLE
        return self._primal(self.c)

    # -- dual simplex ---------------------------------------------------------

    def solve_dual(self) -> LpStatus:
        """Dual simplex from the current basis; used after bound edits, which
        keep reduced costs valid but may break primal feasibility.  Finishes
        with a primal cleanup pass (usually just the optimality check)."""
        self._normalize_statuses()
        if not self._refactor():
            return LpStatus.INFEASIBLE
        degenerate = 0
        bland_after = 5 * (self.m + self.n_total)
        while True:
            if self.iterations >= self.iteration_limit:
                return LpStatus.ITERATION_LIMIT
            self.iterations += 1
            viol_lo = self.lb[self.basis] - self.xb
            viol_up = self.xb - self.ub[self.basis]
            viol = np.maximum(viol_lo, viol_up)
            if self.m == 0 or float(viol.max(initial=-math.inf)) <= _FEAS_TOL:
                return self._primal(self.c)
            row = int(np.argmax(viol))
            below = viol_lo[row] >= viol_up[row]
            y = self._duals(self.c)
            rc = self.c - y @ self.A
            brow = self.binv[row] @ self.A
            free = (self.lb < self.ub) & (self.status_ != _BASIC)
            if below:  # basic value must increase
                cand = free & (
                    ((self.status_ == _AT_LOWER) & (brow < -_PIVOT_TOL))
                    | ((self.status_ == _AT_UPPER) & (brow > _PIVOT_TOL))
                )
            else:  # basic value must decrease
                cand = free & (
                    ((self.status_ == _AT_LOWER) & (brow > _PIVOT_TOL))
                    | ((self.status_ == _AT_UPPER) & (brow < -_PIVOT_TOL))
                )
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return LpStatus.INFEASIBLE
            ratios = np.abs(rc[idx]) / np.abs(brow[idx])
            best = float(ratios.min())
            ties = idx[ratios <= best + 1e-10]
            if degenerate > bland_after:
                enter = int(ties.min())
            else:
                enter = int(ties[np.argmax(np.abs(brow[ties]))])
            if best < _DEGEN_TOL:
                degenerate += 1
            leaving = self.basis[row]
            self.status_[leaving] = _AT_LOWER if below else _AT_UPPER
            d = self.binv @ self.A[:, enter]
            self.basis[row] = enter
            self.status_[enter] = _BASIC
            self._update_binv(d, row)
            self._recompute_xb()

    # -- extraction -----------------------------------------------------------

    def _full_x(self) -> np.ndarray:
        x = self._nonbasic_values()
        x[self.basis] = self.xb
        return x

    def solution(self, status: LpStatus) -> LpSolution:
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status=status, iterations=self.iterations)
        x_full = self._full_x()
        x = x_full[: self.n_struct].copy()
        duals = self._duals(self.c)
        return LpSolution(
            status=status,
            x=x,
            duals=duals.copy(),
            objective=float(self.c[: self.n_struct] @ x),
            iterations=self.iterations,
            basis=(self.basis.copy(), self.status_.copy(), self.n_struct),
        )

    def load_basis(self, token: tuple) -> bool:
        """Install a warm-start basis token.  Columns appended after the token
        was taken default to nonbasic-at-lower."""
        basis_arr, statuses, token_struct = token
        if len(basis_arr) != self.m or token_struct > self.n_struct:
            return False
        shift = self.n_struct - token_struct
        remap = np.asarray(basis_arr, dtype=np.int64).copy()
        remap[remap >= token_struct] += shift
        status_full = np.full(self.n_total, _AT_LOWER, dtype=np.int8)
        old = np.asarray(statuses, dtype=np.int8)
        status_full[:token_struct] = old[:token_struct]
        status_full[token_struct + shift :] = old[token_struct:]
        self.basis = remap
        self.status_ = status_full
        self.status_[self.basis] = _BASIC
        self._normalize_statuses()
        return self._refactor()


def solve_lp(
    lp: LinearProgram,
    start: tuple | None = None,
    iteration_limit: int = DEFAULT_ITERATION_LIMIT,
) -> LpSolution:
    """Solve to an optimal basic solution with row duals.

    Duals follow the minimization convention: GE rows get nonnegative duals,
    LE rows nonpositive.  ``start`` is an opaque basis token from an earlier
    solution of the same (possibly column-extended) program; a still-feasible
    basis skips phase 1, an infeasible one goes through a dual-simplex
    repair, and on any warm-start trouble the solver falls back to a cold
    start.
    """
    solver = _Simplex(lp, iteration_limit)
    if start is not None and solver.load_basis(start):
        status = solver.resume_primal() if solver.primal_feasible() else solver.solve_dual()
        if status in (LpStatus.OPTIMAL, LpStatus.UNBOUNDED):
            return solver.solution(status)
        solver = _Simplex(lp, iteration_limit)
    status = solver.solve_from_scratch()
    return solver.solution(status)


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------


@dataclass
class BnbResult:
    status: str  # "optimal" | "no_integer_solution" | "node_limit" | LpStatus value
    x: np.ndarray | None
    objective: float
    bound: float  # valid lower bound on the optimum over this column set
    nodes: int
    root_objective: float = math.nan

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    fixings: tuple = field(compare=False)
    basis: tuple | None = field(compare=False, default=None)


def branch_and_bound(
    lp: LinearProgram,
    integer_vars,
    incumbent: tuple[np.ndarray, float] | None = None,
    node_limit: int | None = None,
    int_tol: float = 1e-6,
    gap_tol: float = 1e-9,
) -> BnbResult:
    """Best-bound branch and bound over binary variables of a fixed LP.

    No columns are generated in the tree.  Branching picks the most
    fractional variable (|x - 0.5| minimal, ties by lowest index); node LPs
    re-solve by dual simplex from the parent basis, falling back to a cold
    solve if that stalls.  ``incumbent`` seeds pruning with a known
    integer-feasible (x, objective) pair.
    """
    integer_vars = sorted(int(j) for j in integer_vars)
    solver = _Simplex(lp)
    status = solver.solve_from_scratch()
    if status is not LpStatus.OPTIMAL:
        return BnbResult(status=status.value, x=None, objective=math.nan, bound=math.nan, nodes=0)
    root = solver.solution(status)
    root_obj = root.objective

    best_x = None
    best_obj = math.inf
    if incumbent is not None:
        best_x = np.asarray(incumbent[0], dtype=np.float64).copy()
        best_obj = float(incumbent[1])

    def most_fractional(x: np.ndarray) -> int:
        best_j, best_score = -1, math.inf
        for j in integer_vars:
            if abs(x[j] - round(x[j])) <= int_tol:
                continue
            score = abs(x[j] - 0.5)
            if score < best_score - 1e-15:
                best_j, best_score = j, score
        return best_j

    branch_root = most_fractional(root.x)
    if branch_root < 0:
        return BnbResult(
            status="optimal",
            x=root.x.copy(),
            objective=root_obj,
            bound=root_obj,
            nodes=0,
            root_objective=root_obj,
        )

    base_lb = solver.lb[: lp.n_cols].copy()
    base_ub = lp.upper.copy()

    def solve_node(fixings, basis) -> LpStatus:
        solver.lb[: lp.n_cols] = base_lb
        solver.ub[: lp.n_cols] = base_ub
        for j, val in fixings:
            solver.lb[j] = solver.ub[j] = float(val)
        if basis is not None and solver.load_basis(basis):
            status = solver.solve_dual()
            if status in (LpStatus.OPTIMAL, LpStatus.INFEASIBLE):
                return status
        return solver.solve_from_scratch()

    # depth-first dive to the nearest integer point: supplies a strong
    # incumbent before the best-bound search starts
    fixings: tuple = ()
    basis = root.basis
    sol = root
    for _ in range(16 * len(integer_vars) + 16):
        j = most_fractional(sol.x)
        if j < 0:
            if sol.objective < best_obj - gap_tol:
                best_obj = sol.objective
                best_x = sol.x.copy()
            break
        preferred = 1 if sol.x[j] >= 0.5 else 0
        advanced = False
        for val in (preferred, 1 - preferred):
            status = solve_node(fixings + ((j, val),), basis)
            if status is LpStatus.OPTIMAL:
                cand = solver.solution(status)
                if cand.objective < best_obj - gap_tol or best_x is None:
                    fixings = fixings + ((j, val),)
                    basis = cand.basis
                    sol = cand
                    advanced = True
                break
        if not advanced:
            break

    # reduced-cost fixing at the root: binaries whose forced move provably
    # exceeds the incumbent are pinned for the whole tree
    fixed_at_root: list[tuple[int, int]] = []
    if best_obj < math.inf:
        rc = lp.objective - root.duals @ lp.constraints
        for j in integer_vars:
            if root.x[j] <= int_tol and rc[j] > 0 and root_obj + rc[j] > best_obj - gap_tol:
                fixed_at_root.append((j, 0))
            elif root.x[j] >= 1 - int_tol and rc[j] < 0 and root_obj - rc[j] > best_obj - gap_tol:
                fixed_at_root.append((j, 1))
    if best_x is not None:
        # never pin away the incumbent itself
        fixed_at_root = [
            (j, val) for j, val in fixed_at_root if abs(best_x[j] - val) <= int_tol
        ]
    for j, val in fixed_at_root:
        base_lb[j] = base_ub[j] = float(val)

    counter = 0
    frontier: list[_Node] = []
    for val in (0, 1):
        counter += 1
        frontier.append(_Node(root_obj, -counter, ((branch_root, val),), root.basis))
    heapq.heapify(frontier)

    nodes_explored = 0
    open_bound = math.inf  # tightest bound among unexplored nodes when stopping early
    hit_limit = False
    while frontier:
        node = heapq.heappop(frontier)
        if node.bound >= best_obj - gap_tol:
            break  # best-first: every remaining node is at least as bad
        if node_limit is not None and nodes_explored >= node_limit:
            hit_limit = True
            open_bound = node.bound
            break
        nodes_explored += 1
        status = solve_node(node.fixings, node.basis)
        if status is LpStatus.INFEASIBLE:
            continue
        if status is not LpStatus.OPTIMAL:
            continue  # iteration limit: drop node (bound tracking keeps validity)
        sol = solver.solution(status)
        if sol.objective >= best_obj - gap_tol:
            continue
        j = most_fractional(sol.x)
        if j < 0:
            best_obj = sol.objective
            best_x = sol.x.copy()
            continue
        for val in (0, 1):
            counter += 1
            heapq.heappush(
                frontier, _Node(sol.objective, -counter, node.fixings + ((j, val),), sol.basis)
            )

    if hit_limit:
        bound = min(open_bound, best_obj)
        status_str = "node_limit"
    else:
        bound = best_obj if best_x is not None else root_obj
        status_str = "optimal" if best_x is not None else "no_integer_solution"
    return BnbResult(
        status=status_str,
        x=best_x,
        objective=best_obj if best_x is not None else math.nan,
        bound=bound,
        nodes=nodes_explored,
        root_objective=root_obj,
    )
