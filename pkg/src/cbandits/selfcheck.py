"""Built-in oracle/property checks behind the `verify` CLI subcommand.

Each check is small enough to run in seconds and prints one PASS/FAIL line;
the heavyweight empirical claims live in the acceptance test suite.
"""

from __future__ import annotations

import numpy as np

from .algorithms import combination_factor
from .estimation import EstimatorState, SafeSpaceSpec, confidence_radius
from .harness import RunConfig, run_single
from .lp import Polytope, grid_oracle, solve_max_margin, solve_offline_opt
from .model import Strategy, uniform_strategy
from .omd import init_schedule, kkt_residual, omd_step


def _random_lp_instance(rng):
    """Random small instance, feasible with a comfortable margin (so the
    grid oracle cannot miss a sliver) or infeasible outright."""
    k = int(rng.integers(2, 4))
    m = int(rng.integers(1, 3))
    cost_means = rng.random((m, k))
    if rng.random() < 0.8:
        witness = rng.dirichlet(np.ones(k))
        slack = rng.uniform(0.02, 0.5, size=m)
        thresholds = np.clip(cost_means @ witness + slack, 0.0, 1.0)
    else:
        thresholds = np.clip(cost_means.min(axis=1) - 0.05, 0.0, 1.0)
    loss = rng.random(k)
    return loss, cost_means, thresholds, k


def check_lp_against_grid(trials=30, seed=71, step=1e-3, tol=1e-3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        loss, cost_means, thresholds, k = _random_lp_instance(rng)
        rows = tuple((cost_means[i], thresholds[i]) for i in range(cost_means.shape[0]))
        poly = Polytope(k, rows, 0.0)
        exact = solve_offline_opt(loss, cost_means, thresholds)
        approx = grid_oracle(loss, poly, step)
        if exact.status != approx.status:
            return False, f"status mismatch {exact.status} vs {approx.status}"
        if exact.status == "optimal":
            worst = max(worst, abs(exact.objective - approx.objective))
    return worst <= tol, f"max objective gap {worst:.2e}"


def check_max_margin_against_grid(trials=30, seed=72, step=1e-3, tol=1e-3):
    from .errors import SlaterViolationError
    from .lp import _simplex_grid

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        _, cost_means, thresholds, k = _random_lp_instance(rng)
        grid = _simplex_grid(k, step)
        margins = np.min(thresholds[None, :] - grid @ cost_means.T, axis=1)
        grid_margin = float(margins.max())
        try:
            margin = solve_max_margin(cost_means, thresholds).margin
        except SlaterViolationError:
            if grid_margin > tol:
                return False, "solver rejected a Slater-feasible instance"
            continue
        worst = max(worst, abs(margin - grid_margin))
    return worst <= tol, f"max margin gap {worst:.2e}"


def check_omd_against_grid(trials=40, seed=73, step=1e-5, tol=1e-4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        horizon = int(rng.integers(50, 2000))
        sched = init_schedule(2, horizon, float(rng.uniform(0.05, 1.0)))
        current = Strategy(np.array([0.3, 0.7]) if rng.random() < 0.5
                           else rng.dirichlet((2.0, 2.0)))
        if np.any(current.weights < 1.0 / horizon):
            current = uniform_strategy(2)
        loss = rng.uniform(0.0, 5.0, size=2) * (rng.random(2) < 0.7)
        coef = rng.uniform(-1.0, 1.0, size=(1, 2))
        bound = np.array([float(coef[0] @ current.weights) + rng.uniform(-0.2, 0.4)])
        space = SafeSpaceSpec(coef, bound, 1.0 / horizon)
        if space.is_empty():
            continue
        result = omd_step(loss, current, sched, space)
        floor = 1.0 / horizon
        grid_x0 = np.arange(floor, 1.0 - floor + step / 2, step)
        grid = np.column_stack([grid_x0, 1.0 - grid_x0])
        feasible = grid @ coef[0] <= bound[0] + 1e-12
        grid = grid[feasible]
        if grid.size == 0:
            continue
        ratio = grid / current.weights[None, :]
        objective = grid @ loss + np.sum((ratio - 1.0 - np.log(ratio)) / sched.rates, axis=1)
        best = grid[int(np.argmin(objective))]
        worst = max(worst, float(np.abs(best - result.weights).max()))
    return worst <= tol, f"max iterate gap {worst:.2e}"


def check_mix_weight_algebra(trials=10_000, seed=74):
    rng = np.random.default_rng(seed)
    thresholds = rng.uniform(0.05, 0.95, size=trials)
    anchor_costs = thresholds * rng.uniform(0.0, 0.999, size=trials)
    pessimistic = rng.uniform(0.0, 1.4, size=trials)
    worst, equality_gap = 0.0, 0.0
    for alpha, theta, pess in zip(thresholds, anchor_costs, pessimistic):
        gamma = combination_factor([pess], [alpha], [theta])
        clamped = min(pess, 1.0)
        mixed = gamma * theta + (1.0 - gamma) * clamped
        worst = max(worst, mixed - alpha)
        if 0.0 < gamma < 1.0 and pess <= 1.0:
            equality_gap = max(equality_gap, abs(mixed - alpha))
    ok = worst <= 1e-12 and equality_gap <= 1e-12
    return ok, f"max excess {worst:.1e}, max equality gap {equality_gap:.1e}"


def check_radius_formula():
    # T = K = m = 1 with delta = e^{-c} makes ln(TKm/delta) = c exactly.
    ok = confidence_radius(0, 10, 3, 2, 0.1) == 1.0
    got64 = confidence_radius(64, 1, 1, 1, float(np.exp(-4.0)))
    got16 = confidence_radius(16, 1, 1, 1, float(np.exp(-1.0)))
    ok = ok and abs(got64 - 0.5) < 1e-12 and abs(got16 - 0.5) < 1e-12
    return ok, f"radius(64)={got64:.3f}, radius(16)={got16:.3f}"


def check_determinism():
    config = RunConfig(
        instance={"kind": "violation-stress", "horizon": 120, "confidence": 0.1},
        algorithm="colb", eta=0.2, seeds=(5,),
    )
    first = run_single(config, 5)
    second = run_single(config, 5)
    same = (
        np.array_equal(first.regret_cum, second.regret_cum)
        and np.array_equal(first.violation_cum, second.violation_cum)
        and np.array_equal(first.eta_final, second.eta_final)
    )
    return same, "bit-identical metrics across replays"


def check_estimator_update():
    est = EstimatorState(3, 2, 100, 0.1)
    est.update(2, [1.0, 0.0])
    est.update(2, [0.0, 0.0])
    mean = est.means[0, 2]
    return abs(mean - 0.5) < 1e-15 and est.counts[2] == 2, f"mean {mean}"


ALL_CHECKS = (
    ("lp-vs-grid", check_lp_against_grid),
    ("max-margin-vs-grid", check_max_margin_against_grid),
    ("omd-vs-grid", check_omd_against_grid),
    ("mix-weight-safety-algebra", check_mix_weight_algebra),
    ("confidence-radius", check_radius_formula),
    ("estimator-update", check_estimator_update),
    ("run-determinism", check_determinism),
)


def run_all(stream=None) -> bool:
    import sys

    stream = stream or sys.stdout
    all_ok = True
    for name, check in ALL_CHECKS:
        ok, detail = check()
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=stream)
    return all_ok
