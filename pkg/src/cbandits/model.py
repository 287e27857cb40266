"""Shared domain types and elementary strategy operations.

Probabilities are 64-bit floats.  Simplex membership is checked with an
absolute tolerance of 1e-9; small drift (< 1e-7) from accumulated arithmetic
is renormalized away, larger drift raises, since it indicates a solver bug.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIMPLEX_ATOL = 1e-9
RENORM_ATOL = 1e-7


def _as_simplex_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("strategy weights must be a non-empty 1-d vector")
    if np.any(w < -SIMPLEX_ATOL) or not np.all(np.isfinite(w)):
        raise ValueError(f"strategy weights must be non-negative and finite, got {w}")
    total = float(w.sum())
    if abs(total - 1.0) > RENORM_ATOL:
        raise ValueError(f"strategy weights sum to {total}, too far from 1")
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    # Renormalize accumulated drift, but leave machine-precision sums alone:
    # rescaling a solver output perturbs its stationarity certificate.
    if abs(total - 1.0) > 1e-12:
        w = w / total
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class Strategy:
    """A point on the K-simplex: the learner's per-round randomization."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_simplex_weights(self.weights))

    @property
    def num_actions(self) -> int:
        return self.weights.size

    def __getitem__(self, action: int) -> float:
        return float(self.weights[action])

    def in_truncated_simplex(self, horizon: int, atol: float = SIMPLEX_ATOL) -> bool:
        """True when every coordinate is at least 1/horizon."""
        return bool(np.all(self.weights >= 1.0 / horizon - atol))


def uniform_strategy(num_actions: int) -> Strategy:
    return Strategy(np.full(num_actions, 1.0 / num_actions))


def random_truncated_strategy(num_actions: int, horizon: int, rng) -> Strategy:
    """Uniform-ish draw from the truncated simplex {x : x(a) >= 1/horizon}.

    Draws a flat Dirichlet point d and maps it to (1/T)*1 + (1 - K/T)*d, which
    has exact support on the truncated simplex and is cheap and seedable.
    """
    if num_actions > horizon:
        raise ValueError("truncated simplex is empty when num_actions > horizon")
    d = rng.dirichlet(np.ones(num_actions))
    floor = 1.0 / horizon
    return Strategy(floor + (1.0 - num_actions * floor) * d)


def sample_action(strategy: Strategy, rng) -> int:
    """Draw one action index from the strategy.

    Consumes exactly one uniform variate; inverse-CDF over cumulative weights
    with ties broken toward the lower index, so replays are deterministic.
    """
    cumulative = np.cumsum(strategy.weights)
    u = rng.random()
    return min(int(np.searchsorted(cumulative, u, side="right")),
               strategy.num_actions - 1)


def mix(mix_weight: float, anchor: Strategy, proposal: Strategy) -> Strategy:
    """Convex combination mix_weight*anchor + (1-mix_weight)*proposal."""
    if not 0.0 <= mix_weight <= 1.0:
        raise ValueError(f"mix weight must be in [0, 1], got {mix_weight}")
    if anchor.num_actions != proposal.num_actions:
        raise ValueError("mixed strategies must have the same number of actions")
    if mix_weight == 0.0:
        return proposal
    if mix_weight == 1.0:
        return anchor
    return Strategy(mix_weight * anchor.weights + (1.0 - mix_weight) * proposal.weights)


def importance_loss_estimate(loss_observed: float, action: int, played: Strategy) -> np.ndarray:
    """Importance-weighted loss vector: loss/prob at the played action, 0 elsewhere."""
    prob = played[action]
    if prob <= 0.0:
        raise ZeroDivisionError(
            f"played strategy assigns zero probability to action {action}"
        )
    estimate = np.zeros(played.num_actions)
    estimate[action] = loss_observed / prob
    return estimate


@dataclass(frozen=True)
class FeasibleAnchor:
    """A known strictly feasible strategy with its expected costs and margin."""

    strategy: Strategy
    expected_costs: np.ndarray
    margin: float

    def __post_init__(self):
        costs = np.asarray(self.expected_costs, dtype=float)
        costs.flags.writeable = False
        object.__setattr__(self, "expected_costs", costs)
        if self.margin <= 0.0:
            raise ValueError(f"anchor margin must be positive, got {self.margin}")


@dataclass(frozen=True)
class InstanceSpec:
    """Full description of one constrained bandit problem.

    loss_source is ("fixed", T-by-K array) or ("bernoulli", K means): fixed
    sequences are oblivious adversaries materialized up front, generator
    sources are drawn i.i.d. per round at materialization time.
    ("adaptive", callback) is the hook for adversaries that react to the
    history of played strategies/actions; the callback receives
    (round_index, history) and returns the round's loss vector.  No adaptive
    adversaries ship with the library.  cost_source is ("sampled", family)
    with family "bernoulli" or "beta", or ("fixed", T-by-m-by-K array) for
    pre-drawn cost streams.
    """

    num_actions: int
    num_constraints: int
    horizon: int
    confidence: float
    thresholds: np.ndarray
    cost_means: np.ndarray
    loss_source: tuple = ("bernoulli", None)
    cost_source: tuple = ("sampled", "bernoulli")
    name: str = field(default="instance", compare=False)

    def __post_init__(self):
        if self.num_actions < 2:
            raise ValueError("need at least two actions")
        if self.num_constraints < 1:
            raise ValueError("need at least one constraint")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        thresholds = np.asarray(self.thresholds, dtype=float)
        cost_means = np.asarray(self.cost_means, dtype=float)
        if thresholds.shape != (self.num_constraints,):
            raise ValueError("thresholds must have one entry per constraint")
        if cost_means.shape != (self.num_constraints, self.num_actions):
            raise ValueError("cost_means must be num_constraints x num_actions")
        if np.any(thresholds < 0) or np.any(thresholds > 1):
            raise ValueError("thresholds must lie in [0, 1]")
        if np.any(cost_means < 0) or np.any(cost_means > 1):
            raise ValueError("cost means must lie in [0, 1]")
        thresholds.flags.writeable = False
        cost_means.flags.writeable = False
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "cost_means", cost_means)
        self._validate_sources()

    def _validate_sources(self):
        kind, payload = self.loss_source
        if kind == "fixed":
            values = np.asarray(payload, dtype=float)
            if values.shape != (self.horizon, self.num_actions):
                raise ValueError("fixed loss sequence must be horizon x num_actions")
            if np.any(values < 0) or np.any(values > 1):
                raise ValueError("losses must lie in [0, 1]")
            object.__setattr__(self, "loss_source", ("fixed", values))
        elif kind == "bernoulli":
            means = np.asarray(payload, dtype=float)
            if means.shape != (self.num_actions,):
                raise ValueError("bernoulli loss means must have one entry per action")
            if np.any(means < 0) or np.any(means > 1):
                raise ValueError("loss means must lie in [0, 1]")
            object.__setattr__(self, "loss_source", ("bernoulli", means))
        elif kind == "adaptive":
            if not callable(payload):
                raise ValueError("adaptive loss source needs a callback")
        else:
            raise ValueError(f"unknown loss source kind {kind!r}")

        kind, payload = self.cost_source
        if kind == "fixed":
            values = np.asarray(payload, dtype=float)
            expected = (self.horizon, self.num_constraints, self.num_actions)
            if values.shape != expected:
                raise ValueError("fixed cost stream must be horizon x constraints x actions")
            if np.any(values < 0) or np.any(values > 1):
                raise ValueError("costs must lie in [0, 1]")
            object.__setattr__(self, "cost_source", ("fixed", values))
        elif kind == "sampled":
            if payload not in ("bernoulli", "beta"):
                raise ValueError(f"unsupported cost family {payload!r}")
        else:
            raise ValueError(f"unknown cost source kind {kind!r}")

    @property
    def adaptive(self) -> bool:
        return self.loss_source[0] == "adaptive"

    def materialize_losses(self, rng) -> np.ndarray:
        kind, payload = self.loss_source
        if kind == "fixed":
            return payload
        if kind == "adaptive":
            raise ValueError("adaptive losses are produced round by round")
        draws = rng.random((self.horizon, self.num_actions))
        return (draws < payload[None, :]).astype(float)

    def materialize_costs(self, rng) -> np.ndarray:
        from .environments import sample_costs  # avoids a module cycle

        kind, payload = self.cost_source
        if kind == "fixed":
            return payload
        out = np.empty((self.horizon, self.num_constraints, self.num_actions))
        for t in range(self.horizon):
            out[t] = sample_costs(self.cost_means, payload, rng)
        return out


@dataclass(frozen=True)
class RoundRecord:
    """Per-round log entry; the trajectory these form feeds every metric."""

    t: int
    action: int
    loss_observed: float
    costs_observed: np.ndarray
    strategy_played: Strategy
    mix_weight: float
    safe_space_empty: bool
    expected_costs_played: np.ndarray

    def __post_init__(self):
        expected = np.asarray(self.expected_costs_played, dtype=float)
        observed = np.asarray(self.costs_observed, dtype=float)
        object.__setattr__(self, "expected_costs_played", expected)
        object.__setattr__(self, "costs_observed", observed)
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ValueError("mix weight must lie in [0, 1]")
