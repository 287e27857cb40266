"""The two learner state machines and their learning-rate settings.

Both learners share the same skeleton: update cost estimates, build the
truncated safe decision space, and either run a log-barrier OMD step over it
or fall back to a random truncated-simplex draw when the space is empty.
The hard-constraint learner additionally mixes the OMD proposal with a known
strictly feasible anchor, weighted so the mixture's pessimistic cost never
exceeds any threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .estimation import EstimatorState, truncated_safe_space
from .model import (
    FeasibleAnchor,
    Strategy,
    importance_loss_estimate,
    mix,
    random_truncated_strategy,
    uniform_strategy,
)
from .omd import LrSchedule, init_schedule, lr_update, omd_step_with_residual

MAX_RATE_RATIO = 5.0  # the schedule never grows any rate past this multiple


@dataclass(frozen=True)
class ColbState:
    strategy: Strategy
    sched: LrSchedule
    est: EstimatorState
    thresholds: np.ndarray
    round: int
    last_space_empty: bool = False
    last_kkt_residual: float = 0.0


@dataclass(frozen=True)
class SolbState:
    omd_strategy: Strategy
    play_strategy: Strategy
    mix_weight: float
    anchor: FeasibleAnchor
    sched: LrSchedule
    est: EstimatorState
    thresholds: np.ndarray
    round: int
    last_space_empty: bool = False
    last_kkt_residual: float = 0.0


def _fresh_estimator(num_actions, num_constraints, horizon, confidence):
    return EstimatorState(num_actions, num_constraints, horizon, confidence)


def _fallback_strategy(num_actions, horizon, rng) -> Strategy:
    # Degenerate horizon < num_actions leaves the truncated simplex empty;
    # the uniform stand-in keeps short runs well-defined.
    if horizon < num_actions:
        return uniform_strategy(num_actions)
    return random_truncated_strategy(num_actions, horizon, rng)


def _space_is_empty(space, *candidates) -> bool:
    for cand in candidates:
        if space.quick_member(cand):
            return False
    return space.is_empty()


def colb_init(num_actions, num_constraints, horizon, confidence, thresholds,
              base_rate) -> ColbState:
    thresholds = np.asarray(thresholds, dtype=float)
    return ColbState(
        strategy=uniform_strategy(num_actions),
        sched=init_schedule(num_actions, horizon, base_rate),
        est=_fresh_estimator(num_actions, num_constraints, horizon, confidence),
        thresholds=thresholds,
        round=1,
    )


def colb_round(state: ColbState, action: int, loss_observed: float,
               costs_observed, rng):
    """Advance the soft-constraint learner by one round of feedback."""
    est = state.est.update(action, costs_observed)
    space = truncated_safe_space(est, state.thresholds)
    horizon, k = est.horizon, est.num_actions
    uniform = np.full(k, 1.0 / k)
    empty = _space_is_empty(space, uniform, state.strategy.weights)
    if empty:
        nxt = replace(
            state,
            strategy=_fallback_strategy(k, horizon, rng),
            est=est,
            round=state.round + 1,
            last_space_empty=True,
            last_kkt_residual=0.0,
        )
        return nxt, nxt.strategy
    estimate = importance_loss_estimate(loss_observed, action, state.strategy)
    x_next, residual = omd_step_with_residual(estimate, state.strategy, state.sched, space)
    nxt = replace(
        state,
        strategy=x_next,
        sched=lr_update(x_next, state.sched),
        est=est,
        round=state.round + 1,
        last_space_empty=False,
        last_kkt_residual=residual,
    )
    return nxt, nxt.strategy


def combination_factor(pessimistic_costs, thresholds, anchor_costs) -> float:
    """Weight on the anchor that pins the mixed pessimistic cost at/below
    every threshold.

    Zero when no (clamped) pessimistic cost exceeds its threshold; otherwise
    the max over the violating constraints of
    (clamped - threshold) / (clamped - anchor_cost).
    """
    pess = np.minimum(np.asarray(pessimistic_costs, dtype=float), 1.0)
    thresholds = np.asarray(thresholds, dtype=float)
    anchor_costs = np.asarray(anchor_costs, dtype=float)
    if np.any(anchor_costs >= thresholds):
        raise ValueError("anchor costs must be strictly below the thresholds")
    violating = pess > thresholds
    if not np.any(violating):
        return 0.0
    ratios = np.where(violating, (pess - thresholds) / (pess - anchor_costs), 0.0)
    return float(ratios.max())


def initial_mix_weight(thresholds, anchor_costs) -> float:
    thresholds = np.asarray(thresholds, dtype=float)
    anchor_costs = np.asarray(anchor_costs, dtype=float)
    return float(np.max((1.0 - thresholds) / (1.0 - anchor_costs)))


def solb_init(num_actions, num_constraints, horizon, confidence, thresholds,
              anchor: FeasibleAnchor, base_rate) -> SolbState:
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(anchor.expected_costs >= thresholds):
        raise ConfigError("anchor must strictly satisfy every threshold")
    omd_strategy = uniform_strategy(num_actions)
    gamma0 = initial_mix_weight(thresholds, anchor.expected_costs)
    return SolbState(
        omd_strategy=omd_strategy,
        play_strategy=mix(gamma0, anchor.strategy, omd_strategy),
        mix_weight=gamma0,
        anchor=anchor,
        sched=init_schedule(num_actions, horizon, base_rate),
        est=_fresh_estimator(num_actions, num_constraints, horizon, confidence),
        thresholds=thresholds,
        round=1,
    )


def solb_round(state: SolbState, action: int, loss_observed: float,
               costs_observed, rng):
    """Advance the hard-constraint learner by one round of feedback.

    Importance weighting divides by the mixture actually played; the OMD
    update itself moves the internal proposal strategy.
    """
    est = state.est.update(action, costs_observed)
    space = truncated_safe_space(est, state.thresholds)
    horizon, k = est.horizon, est.num_actions
    uniform = np.full(k, 1.0 / k)
    empty = _space_is_empty(space, uniform, state.omd_strategy.weights)
    if empty:
        nxt = replace(
            state,
            omd_strategy=_fallback_strategy(k, horizon, rng),
            play_strategy=state.anchor.strategy,
            mix_weight=1.0,
            est=est,
            round=state.round + 1,
            last_space_empty=True,
            last_kkt_residual=0.0,
        )
        return nxt, nxt.play_strategy
    estimate = importance_loss_estimate(loss_observed, action, state.play_strategy)
    proposal, residual = omd_step_with_residual(
        estimate, state.omd_strategy, state.sched, space
    )
    pessimistic = (est.means + est.radii[None, :]) @ proposal.weights
    gamma = combination_factor(pessimistic, state.thresholds, state.anchor.expected_costs)
    played = mix(gamma, state.anchor.strategy, proposal)
    # Importance weighting stays well-defined: the proposal lives in the
    # truncated simplex and gamma < 1 here, so every action keeps mass.
    assert gamma < 1.0 and np.all(played.weights >= (1.0 - gamma) / horizon - 1e-12)
    nxt = replace(
        state,
        omd_strategy=proposal,
        play_strategy=played,
        mix_weight=gamma,
        sched=lr_update(proposal, state.sched),
        est=est,
        round=state.round + 1,
        last_space_empty=False,
        last_kkt_residual=residual,
    )
    return nxt, nxt.play_strategy


def _ceil_near(value: float) -> int:
    # Guards against 3.0000000000000004-style float noise before ceil.
    return math.ceil(value - 1e-9)


def theoretical_eta(mode: str, margin: float, horizon: float, confidence: float,
                    num_actions: int, opt_loss: float) -> float:
    """Learning rate the regret analysis prescribes.

    Soft mode: min{ 1/(40 H ln T ln(H/delta)), sqrt(K/(L* ln(1/delta))) }
    with H = ln(ceil(ln T) * ceil(3 ln T) / delta).  Hard mode replaces the
    first arm's numerator with the anchor margin and requires
    margin >= 12K/T.  L* is floored at 1, where the bound is vacuous anyway.
    """
    if mode not in ("soft", "hard"):
        raise ConfigError(f"unknown eta mode {mode!r}")
    if not 0.0 < confidence < 1.0:
        raise ConfigError("confidence must lie in (0, 1)")
    if horizon < 2:
        raise ConfigError("the prescribed rate needs a horizon of at least 2")
    log_t = math.log(horizon)
    big_h = math.log(_ceil_near(log_t) * _ceil_near(3.0 * log_t) / confidence)
    numerator = 1.0
    if mode == "hard":
        if margin < 12.0 * num_actions / horizon:
            raise ConfigError(
                "hard mode requires margin >= 12 K / T "
                f"(margin {margin:.4g}, needed {12.0 * num_actions / horizon:.4g})"
            )
        numerator = margin
    arm_stability = numerator / (40.0 * big_h * log_t * math.log(big_h / confidence))
    arm_loss = math.sqrt(num_actions / (max(opt_loss, 1.0) * math.log(1.0 / confidence)))
    return min(arm_stability, arm_loss)


class ColbLearner:
    """Round-by-round driver for the soft-constraint algorithm."""

    uses_anchor = False

    def __init__(self, num_actions, num_constraints, horizon, confidence,
                 thresholds, base_rate):
        self._init_args = (num_actions, num_constraints, horizon, confidence)
        self.state = colb_init(num_actions, num_constraints, horizon, confidence,
                               thresholds, base_rate)
        self.max_kkt_residual = 0.0
        self.empty_rounds = 0

    @property
    def strategy(self) -> Strategy:
        return self.state.strategy

    @property
    def omd_strategy(self) -> Strategy:
        return self.state.strategy

    @property
    def mix_weight(self) -> float:
        return 0.0

    @property
    def sched(self) -> LrSchedule:
        return self.state.sched

    @property
    def estimator(self) -> EstimatorState:
        return self.state.est

    def observe(self, action, loss, costs, rng):
        self.state, _ = colb_round(self.state, action, loss, costs, rng)
        self.max_kkt_residual = max(self.max_kkt_residual, self.state.last_kkt_residual)
        self.empty_rounds += int(self.state.last_space_empty)
        assert self.state.sched.max_ratio <= MAX_RATE_RATIO + 1e-9

    def reset_omd(self, base_rate):
        num_actions, _, horizon, _ = self._init_args
        self.state = replace(
            self.state,
            strategy=uniform_strategy(num_actions),
            sched=init_schedule(num_actions, horizon, base_rate),
        )


class SolbLearner:
    """Round-by-round driver for the hard-constraint algorithm."""

    uses_anchor = True

    def __init__(self, num_actions, num_constraints, horizon, confidence,
                 thresholds, anchor: FeasibleAnchor, base_rate):
        self._init_args = (num_actions, num_constraints, horizon, confidence)
        self.state = solb_init(num_actions, num_constraints, horizon, confidence,
                               thresholds, anchor, base_rate)
        self.max_kkt_residual = 0.0
        self.empty_rounds = 0

    @property
    def strategy(self) -> Strategy:
        return self.state.play_strategy

    @property
    def omd_strategy(self) -> Strategy:
        return self.state.omd_strategy

    @property
    def mix_weight(self) -> float:
        return self.state.mix_weight

    @property
    def sched(self) -> LrSchedule:
        return self.state.sched

    @property
    def estimator(self) -> EstimatorState:
        return self.state.est

    def observe(self, action, loss, costs, rng):
        self.state, _ = solb_round(self.state, action, loss, costs, rng)
        self.max_kkt_residual = max(self.max_kkt_residual, self.state.last_kkt_residual)
        self.empty_rounds += int(self.state.last_space_empty)
        assert self.state.sched.max_ratio <= MAX_RATE_RATIO + 1e-9

    def reset_omd(self, base_rate):
        num_actions, _, horizon, _ = self._init_args
        omd_strategy = uniform_strategy(num_actions)
        gamma0 = initial_mix_weight(self.state.thresholds,
                                    self.state.anchor.expected_costs)
        self.state = replace(
            self.state,
            omd_strategy=omd_strategy,
            play_strategy=mix(gamma0, self.state.anchor.strategy, omd_strategy),
            mix_weight=gamma0,
            sched=init_schedule(num_actions, horizon, base_rate),
        )


class DoublingLearner:
    """Doubling-trick adapter for the benchmark-loss knowledge in the rate.

    Keeps a guess G (starting at 1) for the benchmark loss; whenever the
    observed cumulative loss crosses G the guess doubles and the inner
    learner restarts with the rate recomputed from the new guess.  The cost
    estimator survives restarts (it is algorithm-independent); the OMD
    iterate and schedule reset.
    """

    def __init__(self, inner, eta_for_guess):
        self.inner = inner
        self.eta_for_guess = eta_for_guess
        self.guess = 1.0
        self.cumulative_loss = 0.0
        self.restarts = 0

    @property
    def strategy(self):
        return self.inner.strategy

    @property
    def omd_strategy(self):
        return self.inner.omd_strategy

    @property
    def mix_weight(self):
        return self.inner.mix_weight

    @property
    def sched(self):
        return self.inner.sched

    @property
    def estimator(self):
        return self.inner.estimator

    @property
    def max_kkt_residual(self):
        return self.inner.max_kkt_residual

    @property
    def empty_rounds(self):
        return self.inner.empty_rounds

    @property
    def state(self):
        return self.inner.state

    def observe(self, action, loss, costs, rng):
        self.inner.observe(action, loss, costs, rng)
        self.cumulative_loss += loss
        while self.cumulative_loss > self.guess:
            self.guess *= 2.0
            self.restarts += 1
            self.inner.reset_omd(self.eta_for_guess(self.guess))


def doubling_eta_wrapper(factory, eta_for_guess) -> DoublingLearner:
    """Build the inner learner at the initial guess and wrap it."""
    return DoublingLearner(factory(eta_for_guess(1.0)), eta_for_guess)
