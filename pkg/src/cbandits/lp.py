"""Exact small-scale linear programming.

Backs the offline benchmark (best hindsight strategy that satisfies the
constraints in expectation), the max-margin strictly feasible strategy, and
feasibility tests for the truncated safe decision spaces.

The solver is a dense two-phase simplex with Bland's rule: instances here
have at most a few dozen actions and a handful of constraints, so cycling
protection and auditability matter more than speed.  Ties between optimal
vertices are broken by Bland's pivoting order, which is deterministic but
arbitrary; metrics therefore always compare objective values, never the
identity of the returned point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleError, SlaterViolationError
from .model import FeasibleAnchor, Strategy

_TOL = 1e-9
_MAX_PIVOTS = 20000


@dataclass(frozen=True)
class Polytope:
    """Intersection of c @ x <= bound rows, the simplex, and lower bounds."""

    dim: int
    rows: tuple
    lower_bounds: np.ndarray

    def __post_init__(self):
        rows = []
        for coef, bound in self.rows:
            coef = np.asarray(coef, dtype=float)
            if coef.shape != (self.dim,):
                raise ValueError("row coefficient length must match dim")
            rows.append((coef, float(bound)))
        object.__setattr__(self, "rows", tuple(rows))
        lb = np.broadcast_to(np.asarray(self.lower_bounds, dtype=float), (self.dim,)).copy()
        lb.flags.writeable = False
        object.__setattr__(self, "lower_bounds", lb)

    def row_matrix(self):
        if not self.rows:
            return np.zeros((0, self.dim)), np.zeros(0)
        coefs = np.stack([c for c, _ in self.rows])
        bounds = np.array([b for _, b in self.rows])
        return coefs, bounds

    def contains(self, x: np.ndarray, atol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        if abs(x.sum() - 1.0) > atol or np.any(x < self.lower_bounds - atol):
            return False
        coefs, bounds = self.row_matrix()
        return bool(np.all(coefs @ x <= bounds + atol))


@dataclass(frozen=True)
class LpSolution:
    point: Strategy | None
    objective: float
    status: str  # "optimal" | "infeasible" | "unbounded"


def _pivot(tableau, basis, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    basis[row] = col


def _bland_phase(tableau, basis, reduced, tol=_TOL):
    """Run simplex pivots until reduced costs are non-negative (Bland's rule)."""
    n_rows, n_total = tableau.shape
    n_cols = n_total - 1
    for _ in range(_MAX_PIVOTS):
        entering = -1
        for j in range(n_cols):
            if reduced[j] < -tol:
                entering = j
                break
        if entering < 0:
            return "optimal"
        column = tableau[:, entering]
        best_ratio = np.inf
        leave = -1
        for i in range(n_rows):
            if column[i] > tol:
                ratio = tableau[i, -1] / column[i]
                if ratio < best_ratio - tol or (
                    abs(ratio - best_ratio) <= tol and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        _pivot(tableau, basis, leave, entering)
        reduced -= reduced[entering] * tableau[leave, :-1]
    raise ConvergenceError("simplex exceeded the pivot budget")


def simplex_solve(costs, a_ub=None, b_ub=None, a_eq=None, b_eq=None):
    """min costs @ z subject to a_ub z <= b_ub, a_eq z = b_eq, z >= 0."""
    costs = np.asarray(costs, dtype=float)
    n = costs.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(np.asarray(a_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))

    n_ub, n_eq = a_ub.shape[0], a_eq.shape[0]
    m = n_ub + n_eq
    slack = np.vstack([np.eye(n_ub), np.zeros((n_eq, n_ub))]) if n_ub else np.zeros((m, 0))
    body = np.hstack([np.vstack([a_ub, a_eq]) if m else np.zeros((0, n)), slack])
    rhs = np.concatenate([b_ub, b_eq])

    negative = rhs < 0
    body[negative] *= -1.0
    rhs = np.where(negative, -rhs, rhs)

    # Identity columns come for free from slacks of non-negated <= rows;
    # every other row gets an artificial variable.
    needs_artificial = np.ones(m, dtype=bool)
    basis = np.full(m, -1, dtype=int)
    for i in range(n_ub):
        if not negative[i]:
            needs_artificial[i] = False
            basis[i] = n + i
    art_rows = np.flatnonzero(needs_artificial)
    art = np.zeros((m, art_rows.size))
    for j, i in enumerate(art_rows):
        art[i, j] = 1.0
        basis[i] = n + n_ub + j

    tableau = np.hstack([body, art, rhs[:, None]])
    n_real = n + n_ub

    # Phase 1: minimize the sum of artificials.
    phase1_cost = np.zeros(n_real + art_rows.size)
    phase1_cost[n_real:] = 1.0
    reduced = phase1_cost.copy()
    for i in range(m):
        if phase1_cost[basis[i]] != 0.0:
            reduced -= phase1_cost[basis[i]] * tableau[i, :-1]
    status = _bland_phase(tableau, basis, reduced)
    if status != "optimal":
        raise ConvergenceError("phase-1 simplex did not terminate at an optimum")
    artificial_level = float(sum(tableau[i, -1] for i in range(m) if basis[i] >= n_real))
    if artificial_level > 1e-9:
        return LpSolutionRaw("infeasible", np.zeros(n), np.nan)

    # Pivot remaining artificials out; rows that cannot pivot are redundant.
    keep_rows = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n_real:
            pivot_col = -1
            for j in range(n_real):
                if abs(tableau[i, j]) > _TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                _pivot(tableau, basis, i, pivot_col)
            else:
                keep_rows[i] = False
    tableau = np.hstack([tableau[keep_rows][:, :n_real], tableau[keep_rows][:, -1:]])
    basis = basis[keep_rows]

    # Phase 2 on the real objective.
    phase2_cost = np.concatenate([costs, np.zeros(n_ub)])
    reduced = phase2_cost.copy()
    for i in range(basis.size):
        if phase2_cost[basis[i]] != 0.0:
            reduced -= phase2_cost[basis[i]] * tableau[i, :-1]
    status = _bland_phase(tableau, basis, reduced)
    if status == "unbounded":
        return LpSolutionRaw("unbounded", np.zeros(n), -np.inf)

    z = np.zeros(n_real)
    for i, bi in enumerate(basis):
        z[bi] = tableau[i, -1]
    z = z[:n]
    return LpSolutionRaw("optimal", z, float(costs @ z))


@dataclass(frozen=True)
class LpSolutionRaw:
    status: str
    z: np.ndarray
    objective: float


def _shifted_program(polytope: Polytope, extra_cols: int = 0):
    """Rewrite the polytope over y = x - lower_bounds >= 0."""
    coefs, bounds = polytope.row_matrix()
    lb = polytope.lower_bounds
    b_shift = bounds - coefs @ lb if coefs.size else bounds
    eq = np.ones((1, polytope.dim + extra_cols))
    eq[0, polytope.dim:] = 0.0
    eq_rhs = np.array([1.0 - lb.sum()])
    if extra_cols:
        coefs = np.hstack([coefs, np.zeros((coefs.shape[0], extra_cols))]) if coefs.size else coefs
    return coefs, b_shift, eq, eq_rhs, lb


def feasibility_check(polytope: Polytope) -> bool:
    """True iff some point satisfies all rows, lower bounds, and sum-to-one."""
    if 1.0 - polytope.lower_bounds.sum() < -_TOL:
        return False
    coefs, b_shift, eq, eq_rhs, _ = _shifted_program(polytope)
    raw = simplex_solve(
        np.zeros(polytope.dim),
        a_ub=coefs if coefs.size else None,
        b_ub=b_shift if coefs.size else None,
        a_eq=eq[:, : polytope.dim],
        b_eq=eq_rhs,
    )
    return raw.status == "optimal"


def max_interior_point(polytope: Polytope):
    """Point maximizing the joint slack of rows and lower bounds.

    Returns (x, slack); slack <= 0 means the polytope has no strict interior.
    """
    coefs, b_shift, _, _, lb = _shifted_program(polytope)
    k = polytope.dim
    # Variables (w, t): x = w + t*1 + lb, rows become c@w + (sum(c)+1) t <= b'.
    if coefs.size:
        a_ub = np.hstack([coefs, (coefs.sum(axis=1) + 1.0)[:, None]])
    else:
        a_ub = None
    a_eq = np.concatenate([np.ones(k), [float(k)]])[None, :]
    b_eq = np.array([1.0 - lb.sum()])
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    raw = simplex_solve(cost, a_ub=a_ub, b_ub=b_shift if coefs.size else None, a_eq=a_eq, b_eq=b_eq)
    if raw.status != "optimal":
        raise InfeasibleError("polytope is empty")
    t = raw.z[-1]
    x = raw.z[:k] + t + lb
    return x, float(t)


def solve_offline_opt(mean_loss, cost_means, thresholds) -> LpSolution:
    """Best strategy for the mean loss among those meeting every threshold."""
    mean_loss = np.asarray(mean_loss, dtype=float)
    cost_means = np.atleast_2d(np.asarray(cost_means, dtype=float))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    k = mean_loss.size
    raw = simplex_solve(
        mean_loss,
        a_ub=cost_means,
        b_ub=thresholds,
        a_eq=np.ones((1, k)),
        b_eq=np.array([1.0]),
    )
    if raw.status != "optimal":
        return LpSolution(None, np.nan, raw.status)
    point = Strategy(raw.z)
    return LpSolution(point, float(mean_loss @ point.weights), "optimal")


def solve_max_margin(cost_means, thresholds) -> FeasibleAnchor:
    """Strategy maximizing the worst-case threshold margin (Slater point)."""
    cost_means = np.atleast_2d(np.asarray(cost_means, dtype=float))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    m, k = cost_means.shape
    # Variables (x, s+, s-): maximize s = s+ - s- with g_i @ x + s <= alpha_i.
    a_ub = np.hstack([cost_means, np.ones((m, 1)), -np.ones((m, 1))])
    a_eq = np.concatenate([np.ones(k), [0.0, 0.0]])[None, :]
    cost = np.zeros(k + 2)
    cost[k], cost[k + 1] = -1.0, 1.0
    raw = simplex_solve(cost, a_ub=a_ub, b_ub=thresholds, a_eq=a_eq, b_eq=np.array([1.0]))
    if raw.status != "optimal":
        raise SlaterViolationError("max-margin program has no solution")
    strategy = Strategy(raw.z[:k])
    expected_costs = cost_means @ strategy.weights
    margin = float(np.min(thresholds - expected_costs))
    if margin <= 0.0:
        raise SlaterViolationError(
            f"no strictly feasible strategy exists (best margin {margin:.3g})"
        )
    return FeasibleAnchor(strategy, expected_costs, margin)


def _simplex_grid(dim: int, step: float):
    n = int(round(1.0 / step))
    if dim == 2:
        j = np.arange(n + 1)
        pts = np.column_stack([j, n - j]) / n
    elif dim == 3:
        j, k = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        mask = j + k <= n
        j, k = j[mask], k[mask]
        pts = np.column_stack([j, k, n - j - k]) / n
    else:
        raise ValueError("grid oracle supports dim <= 3 only")
    return pts


def grid_oracle(objective, polytope: Polytope, step: float) -> LpSolution:
    """Exhaustive scan over the discretized simplex; brute-force test oracle."""
    if polytope.dim > 3:
        raise ValueError("grid oracle supports dim <= 3 only")
    if step > 1e-2:
        raise ValueError("grid oracle requires step <= 1e-2")
    objective = np.asarray(objective, dtype=float)
    pts = _simplex_grid(polytope.dim, step)
    feasible = np.all(pts >= polytope.lower_bounds[None, :] - 1e-12, axis=1)
    coefs, bounds = polytope.row_matrix()
    if coefs.size:
        feasible &= np.all(pts @ coefs.T <= bounds[None, :] + 1e-12, axis=1)
    if not np.any(feasible):
        return LpSolution(None, np.nan, "infeasible")
    values = pts[feasible] @ objective
    best = int(np.argmin(values))
    return LpSolution(Strategy(pts[feasible][best]), float(values[best]), "optimal")
