"""Online cost estimation, confidence radii, and safe decision spaces.

Radii use the natural logarithm and keep the union bound over rounds,
actions, and constraints inside the formula, so callers pass the run-level
confidence parameter unchanged.  Radii are recomputed lazily, only for the
action just observed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import Polytope, feasibility_check


def confidence_radius(n: int, horizon: int, num_actions: int, num_constraints: int,
                      confidence: float) -> float:
    """Hoeffding radius min{1, sqrt(4 ln(TKm/delta) / max(1, n))}."""
    log_term = np.log(horizon * num_actions * num_constraints / confidence)
    return min(1.0, float(np.sqrt(4.0 * log_term / max(1, n))))


class EstimatorState:
    """Per-action observation counts, cost sums, and confidence radii."""

    def __init__(self, num_actions, num_constraints, horizon, confidence):
        self.num_actions = num_actions
        self.num_constraints = num_constraints
        self.horizon = horizon
        self.confidence = confidence
        self.log_term = float(np.log(horizon * num_actions * num_constraints / confidence))
        self.counts = np.zeros(num_actions, dtype=np.int64)
        self.cost_sums = np.zeros((num_constraints, num_actions))
        self.radii = np.ones(num_actions)

    def update(self, action: int, observed_costs) -> "EstimatorState":
        costs = np.asarray(observed_costs, dtype=float)
        if costs.shape != (self.num_constraints,):
            raise ValueError("need one observed cost per constraint")
        if np.any(costs < 0.0) or np.any(costs > 1.0):
            raise ValueError("observed costs must lie in [0, 1]")
        self.counts[action] += 1
        self.cost_sums[:, action] += costs
        self.radii[action] = min(
            1.0, np.sqrt(4.0 * self.log_term / self.counts[action])
        )
        return self

    @property
    def means(self) -> np.ndarray:
        return self.cost_sums / np.maximum(1, self.counts)[None, :]

    def copy(self) -> "EstimatorState":
        dup = EstimatorState(self.num_actions, self.num_constraints,
                             self.horizon, self.confidence)
        dup.counts = self.counts.copy()
        dup.cost_sums = self.cost_sums.copy()
        dup.radii = self.radii.copy()
        return dup


@dataclass(frozen=True)
class SafeSpaceSpec:
    """Optimistic cost rows (means - radii) with their bounds and floor.

    relaxed rows shift every bound by +K/T; truncated adds the 1/T
    per-coordinate floor of the truncated simplex.
    """

    coefficients: np.ndarray  # num_constraints x num_actions
    bounds: np.ndarray
    lower_bound: float

    def as_polytope(self) -> Polytope:
        rows = tuple((self.coefficients[i], float(self.bounds[i]))
                     for i in range(self.coefficients.shape[0]))
        return Polytope(self.coefficients.shape[1], rows, self.lower_bound)

    def is_empty(self) -> bool:
        return not feasibility_check(self.as_polytope())

    def quick_member(self, x: np.ndarray, atol: float = 0.0) -> bool:
        """Cheap witness check: is x inside (rows, floor, simplex assumed)?"""
        if np.any(x < self.lower_bound - 1e-12):
            return False
        return bool(np.all(self.coefficients @ x <= self.bounds + atol))


def safe_space(state: EstimatorState, thresholds, *, relaxed: bool,
               truncated: bool) -> SafeSpaceSpec:
    thresholds = np.asarray(thresholds, dtype=float)
    coefficients = state.means - state.radii[None, :]
    bounds = thresholds.copy()
    if relaxed:
        bounds = bounds + state.num_actions / state.horizon
    lower = 1.0 / state.horizon if truncated else 0.0
    return SafeSpaceSpec(coefficients, bounds, lower)


def truncated_safe_space(state: EstimatorState, thresholds, horizon=None) -> SafeSpaceSpec:
    """The decision space both algorithms project onto: relaxed rows + floor."""
    if horizon is not None and horizon != state.horizon:
        raise ValueError("horizon disagrees with the estimator state")
    return safe_space(state, thresholds, relaxed=True, truncated=True)


def clean_event_holds(state: EstimatorState, cost_means) -> bool:
    """Test-only check that every empirical mean sits within its radius."""
    cost_means = np.asarray(cost_means, dtype=float)
    return bool(np.all(np.abs(state.means - cost_means) <= state.radii[None, :] + 1e-12))
