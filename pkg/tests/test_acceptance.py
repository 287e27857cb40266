"""Acceptance suite: one test per criterion, pass/fail line printed for each.

The heavyweight run batches (criteria 1, 3, 4) execute once per session and
are shared by the learning-rate-cap and projection-residual criteria.
"""

import math
import time

import numpy as np
import pytest

from cbandits.algorithms import combination_factor
from cbandits.environments import (
    BallSpec,
    LowerBoundParams,
    ball_membership,
    lb_cost_means,
    lb_instance,
)
from cbandits.estimation import EstimatorState, SafeSpaceSpec, clean_event_holds
from cbandits.harness import RunConfig, run, run_single
from cbandits.lp import Polytope, _simplex_grid, grid_oracle, solve_max_margin, solve_offline_opt
from cbandits.model import Strategy, uniform_strategy
from cbandits.omd import init_schedule, omd_step
from cbandits.selfcheck import _random_lp_instance

DELTA = 0.05


def _report(number, name, ok, detail):
    print(f"ACCEPTANCE {number:>2} {name}: {'PASS' if ok else 'FAIL'} -- {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


@pytest.fixture(scope="session")
def solb_safety_batch():
    config = RunConfig(
        instance={"kind": "safety-stress", "horizon": 2000, "confidence": DELTA},
        algorithm="solb", eta="oracle", seeds=tuple(range(200)),
    )
    start = time.perf_counter()
    results = run(config, workers=2)
    elapsed = time.perf_counter() - start
    return results, elapsed


@pytest.fixture(scope="session")
def colb_violation_batch():
    batches = {}
    for horizon in (1000, 4000, 16000):
        config = RunConfig(
            instance={"kind": "violation-stress", "horizon": horizon,
                      "confidence": DELTA},
            algorithm="colb", eta=0.3, seeds=tuple(range(30)),
        )
        batches[horizon] = run(config, workers=2)
    return batches


@pytest.fixture(scope="session")
def smallloss_batch():
    horizon = 8000
    batches = {}
    for level in (0.05, 0.2, 0.5, 1.0):
        design_loss = level * 0.2 * horizon
        eta = math.sqrt(3.0 / (max(design_loss, 1.0) * math.log(1.0 / DELTA)))
        config = RunConfig(
            instance={"kind": "smallloss", "level": level, "horizon": horizon,
                      "confidence": DELTA},
            algorithm="colb", eta=eta, seeds=tuple(range(50)),
        )
        batches[level] = run(config, workers=2)
    return batches


def test_criterion_1_solb_hard_safety(solb_safety_batch):
    results, elapsed = solb_safety_batch
    breaches = sum(r.safety_breach_round is not None for r in results)
    fraction = breaches / len(results)
    bound = DELTA + 0.031
    ok = fraction <= bound and elapsed <= 300.0
    _report(1, "SOLB hard safety", ok,
            f"breach fraction {fraction:.4f} <= {bound:.3f} "
            f"({breaches}/{len(results)} runs), runtime {elapsed:.0f}s <= 300s")


def test_criterion_2_mix_weight_safety_algebra():
    rng = np.random.default_rng(20250810)
    worst_excess = -np.inf
    worst_equality_gap = 0.0
    for _ in range(10_000):
        alpha = rng.uniform(0.02, 0.98)
        theta = alpha * rng.uniform(0.0, 0.999)
        pess = rng.uniform(0.0, 1.5)
        gamma = combination_factor([pess], [alpha], [theta])
        clamped = min(pess, 1.0)
        mixed = gamma * theta + (1.0 - gamma) * clamped
        worst_excess = max(worst_excess, mixed - alpha)
        if 0.0 < gamma < 1.0 and pess <= 1.0:
            worst_equality_gap = max(worst_equality_gap, abs(mixed - alpha))
    ok = worst_excess <= 1e-12 and worst_equality_gap <= 1e-12
    _report(2, "mix-weight safety algebra", ok,
            f"max excess {worst_excess:.2e}, max equality gap {worst_equality_gap:.2e}")


def test_criterion_3_colb_violation_rate(colb_violation_batch):
    medians, ratios = {}, {}
    for horizon, results in colb_violation_batch.items():
        med = float(np.median([r.violation_final for r in results]))
        norm = math.sqrt(2 * horizon * math.log(horizon * 2 * 1 / DELTA))
        medians[horizon] = med
        ratios[horizon] = med / norm
    horizons = np.array(sorted(medians))
    slope = float(np.polyfit(np.log(horizons),
                             np.log([medians[t] for t in horizons]), 1)[0])
    ok = all(r <= 12.0 for r in ratios.values()) and 0.35 <= slope <= 0.65
    _report(3, "COLB violation rate", ok,
            "ratios " + ", ".join(f"T={t}: {ratios[t]:.2f}" for t in horizons)
            + f"; slope {slope:.3f} in [0.35, 0.65]")


def test_criterion_4_smallloss_scaling(smallloss_batch):
    levels = sorted(smallloss_batch)
    regret = np.array([float(np.median([r.regret_final for r in smallloss_batch[l]]))
                       for l in levels])
    bench = np.array([float(np.median([r.benchmark_loss for r in smallloss_batch[l]]))
                      for l in levels])
    positive = bool(np.all(regret > 0) and np.all(bench > 0))
    slope = float(np.polyfit(np.log(bench), np.log(regret), 1)[0]) if positive else float("nan")
    ok = positive and 0.3 <= slope <= 0.8
    _report(4, "small-loss regret scaling", ok,
            f"median regrets {np.round(regret, 1).tolist()} at benchmark losses "
            f"{np.round(bench, 1).tolist()}; slope {slope:.3f} in [0.3, 0.8]")


def test_criterion_5_omd_step_correctness(solb_safety_batch, colb_violation_batch,
                                          smallloss_batch):
    tracked = [r.max_kkt_residual for r in solb_safety_batch[0]]
    for results in colb_violation_batch.values():
        tracked += [r.max_kkt_residual for r in results]
    for results in smallloss_batch.values():
        tracked += [r.max_kkt_residual for r in results]
    worst_tracked = max(tracked)

    rng = np.random.default_rng(99)
    worst_gap = 0.0
    checked = 0
    while checked < 200:
        horizon = int(rng.integers(50, 3000))
        sched = init_schedule(2, horizon, float(rng.uniform(0.05, 1.2)))
        current = Strategy(rng.dirichlet((2.0, 2.0)))
        if not current.in_truncated_simplex(horizon):
            current = uniform_strategy(2)
        loss = rng.uniform(0.0, 5.0, size=2) * (rng.random(2) < 0.7)
        coef = rng.uniform(-1.0, 1.0, size=(1, 2))
        bound = np.array([float(coef[0] @ current.weights) + rng.uniform(-0.15, 0.4)])
        space = SafeSpaceSpec(coef, bound, 1.0 / horizon)
        if space.is_empty():
            continue
        checked += 1
        out = omd_step(loss, current, sched, space)
        floor = 1.0 / horizon
        step = 1e-5
        x0 = np.arange(floor, 1.0 - floor + step / 2, step)
        grid = np.column_stack([x0, 1.0 - x0])
        ok_rows = grid @ coef[0] <= bound[0] + 1e-12
        grid = grid[ok_rows]
        ratio = grid / current.weights[None, :]
        objective = grid @ loss + np.sum((ratio - 1 - np.log(ratio)) / sched.rates, axis=1)
        best = grid[int(np.argmin(objective))]
        worst_gap = max(worst_gap, float(np.abs(best - out.weights).max()))
    ok = worst_tracked <= 1e-8 and worst_gap <= 1e-4
    _report(5, "projection-step correctness", ok,
            f"max tracked KKT residual {worst_tracked:.2e} <= 1e-8 over "
            f"{len(tracked)} runs; max iterate gap vs grid {worst_gap:.2e} <= 1e-4")


def test_criterion_6_lp_oracle():
    rng = np.random.default_rng(606)
    worst_obj = 0.0
    worst_margin = 0.0
    checked = 0
    while checked < 100:
        loss, cost_means, thresholds, k = _random_lp_instance(rng)
        if cost_means.shape[0] > 2:
            continue
        checked += 1
        poly = Polytope(k, tuple(zip(cost_means, thresholds)), 0.0)
        exact = solve_offline_opt(loss, cost_means, thresholds)
        approx = grid_oracle(loss, poly, 1e-3)
        assert exact.status == approx.status
        if exact.status == "optimal":
            worst_obj = max(worst_obj, abs(exact.objective - approx.objective))
        grid = _simplex_grid(k, 1e-3)
        grid_margin = float(np.min(thresholds[None, :] - grid @ cost_means.T, axis=1).max())
        try:
            margin = solve_max_margin(cost_means, thresholds).margin
            worst_margin = max(worst_margin, abs(margin - grid_margin))
        except Exception:
            assert grid_margin <= 1e-3
    ok = worst_obj <= 1e-3 and worst_margin <= 1e-3
    _report(6, "LP oracle vs grid", ok,
            f"max objective gap {worst_obj:.2e} <= 1e-3, "
            f"max margin gap {worst_margin:.2e} <= 1e-3 over 100 instances")


def _clean_event_curve(seed, horizon, means, delta):
    """Vectorized per-round clean-event flags for one estimation-only run."""
    rng = np.random.default_rng(seed)
    m, k = means.shape
    actions = rng.integers(0, k, size=horizon)
    observed = (rng.random((horizon, m)) < means.T[actions]).astype(float)
    log_term = math.log(horizon * k * m / delta)
    onehot = np.zeros((horizon, k))
    onehot[np.arange(horizon), actions] = 1.0
    counts = np.cumsum(onehot, axis=0)
    sums = np.cumsum(onehot[:, None, :] * observed[:, :, None], axis=0)
    denom = np.maximum(counts, 1.0)
    estimates = sums / denom[:, None, :]
    radii = np.minimum(1.0, np.sqrt(4.0 * log_term / denom))
    deviations = np.abs(estimates - means[None, :, :])
    return np.all(deviations <= radii[:, None, :] + 1e-12, axis=(1, 2))


def test_criterion_7_clean_event_frequency():
    horizon, runs = 500, 2000
    means = np.array([[0.7, 0.5, 0.3]])

    # Cross-check the vectorized oracle against the estimator class,
    # consuming the generator in the same order.
    for seed in range(3):
        rng = np.random.default_rng(seed)
        actions = rng.integers(0, 3, size=horizon)
        observed = (rng.random((horizon, 1)) < means.T[actions]).astype(float)
        est = EstimatorState(3, 1, horizon, DELTA)
        flags = []
        for t in range(horizon):
            est.update(int(actions[t]), observed[t])
            flags.append(clean_event_holds(est, means))
        np.testing.assert_array_equal(
            np.array(flags), _clean_event_curve(seed, horizon, means, DELTA)
        )

    held = sum(bool(_clean_event_curve(seed, horizon, means, DELTA).all())
               for seed in range(runs))
    fraction = held / runs
    slack = 2.0 * math.sqrt(DELTA * (1 - DELTA) / runs)
    ok = fraction >= 1.0 - DELTA - slack
    _report(7, "clean-event frequency", ok,
            f"all-round event frequency {fraction:.4f} >= {1 - DELTA - slack:.4f} "
            f"over {runs} estimation-only runs")


def test_criterion_8_learning_rate_cap(solb_safety_batch, colb_violation_batch,
                                       smallloss_batch):
    ratios = [r.eta_max_ratio for r in solb_safety_batch[0]]
    for results in colb_violation_batch.values():
        ratios += [r.eta_max_ratio for r in results]
    for results in smallloss_batch.values():
        ratios += [r.eta_max_ratio for r in results]
    worst = max(ratios)
    ok = worst <= 5.0
    _report(8, "learning-rate cap", ok,
            f"max rate ratio {worst:.3f} <= 5 across {len(ratios)} completed runs")


def test_criterion_9_lower_bound_fidelity():
    params = LowerBoundParams(omega=0.3, rho_lb=0.2, delta_gap=0.25, horizon=100_000)
    worst = 0.0
    for variant in (1, 2, 3, 4):
        losses, costs, _ = lb_instance(variant, params, np.random.default_rng(42))
        low, high = params.omega / 2, (params.omega + params.gap_psi) / 2
        third = (params.omega + params.delta_gap) / 2
        loss_means = {
            1: (low, low, third), 2: (low, high, third),
            3: (high, low, third), 4: (high, high, third),
        }[variant]
        worst = max(worst, float(np.abs(losses.mean(0) - loss_means).max()))
        worst = max(worst, float(np.abs(costs[:, 0, :].mean(0)
                                        - lb_cost_means(variant, params)[0]).max()))

    horizon, omega, runs = 2000, 0.2, 2000
    halved = LowerBoundParams(omega=omega / 2, rho_lb=0.2, delta_gap=0.3,
                              horizon=horizon)
    ball = BallSpec(omega=omega / 2, delta_gap=0.3, horizon=horizon)
    x_star = Strategy([1.0, 0.0, 0.0])
    x_diamond = Strategy([0.0, 0.0, 1.0])
    members = sum(
        ball_membership(lb_instance(2, halved, np.random.default_rng(seed))[0],
                        x_star, x_diamond, ball)
        for seed in range(runs)
    )
    fraction = members / runs
    delta_prime = 1.0 / (228 * horizon)
    slack = 2.0 * math.sqrt(delta_prime * (1 - delta_prime) / runs)
    threshold = 1.0 - delta_prime - slack
    ok = worst <= 0.01 and fraction >= threshold
    _report(9, "lower-bound instance fidelity", ok,
            f"max mean deviation {worst:.4f} <= 0.01 at T=1e5; "
            f"ball membership {fraction:.5f} >= {threshold:.5f} over {runs} seeds")


def test_criterion_10_regret_decomposition():
    worst = 0.0
    for seed in range(5):
        config = RunConfig(
            instance={"kind": "safety-stress", "horizon": 2000, "confidence": DELTA},
            algorithm="solb", eta="oracle", seeds=(seed,), keep_trajectory=True,
        )
        metrics = run_single(config, seed)
        traj = metrics.trajectory
        losses, omd, gammas = traj["losses"], traj["omd"], traj["mix_weights"]
        anchor, benchmark = traj["anchor"], traj["benchmark"]
        anchor_part = float(np.sum(gammas * (losses @ (anchor - benchmark))))
        omd_part = float(np.sum((1.0 - gammas)
                                * np.einsum("ta,ta->t", losses, omd - benchmark[None, :])))
        reconstructed = anchor_part + omd_part
        worst = max(worst, abs(reconstructed - metrics.regret_final))
    ok = worst <= 1e-6
    _report(10, "regret decomposition", ok,
            f"max |reconstruction - direct| {worst:.2e} <= 1e-6 over 5 runs")
