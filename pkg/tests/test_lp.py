import numpy as np
import pytest

from cbandits.errors import SlaterViolationError
from cbandits.lp import (
    Polytope,
    feasibility_check,
    grid_oracle,
    max_interior_point,
    simplex_solve,
    solve_max_margin,
    solve_offline_opt,
)
from cbandits.selfcheck import _random_lp_instance


def test_offline_opt_binding_constraint():
    # Grid-search oracle at step 1e-4 confirms (0.5, 0.5) with value 0.5.
    sol = solve_offline_opt([0.0, 1.0], [[1.0, 0.0]], [0.5])
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.point.weights, [0.5, 0.5], atol=1e-9)
    assert abs(sol.objective - 0.5) < 1e-9


def test_offline_opt_unconstrained_vertex():
    sol = solve_offline_opt([0.0, 1.0], [[0.0, 0.0]], [1.0])
    np.testing.assert_allclose(sol.point.weights, [1.0, 0.0], atol=1e-9)
    assert abs(sol.objective) < 1e-12


def test_offline_opt_degenerate_objective():
    # Any feasible point is optimal; only the value is contractual.
    sol = solve_offline_opt([0.3, 0.3], [[1.0, 0.0]], [0.5])
    assert abs(sol.objective - 0.3) < 1e-9
    assert float(sol.point.weights @ [1.0, 0.0]) <= 0.5 + 1e-8


def test_offline_opt_infeasible():
    sol = solve_offline_opt([0.1, 0.2], [[0.9, 0.8]], [0.5])
    assert sol.status == "infeasible" and sol.point is None


def test_max_margin_examples():
    anchor = solve_max_margin([[1.0, 0.0]], [0.5])
    np.testing.assert_allclose(anchor.strategy.weights, [0.0, 1.0], atol=1e-9)
    assert abs(anchor.expected_costs[0]) < 1e-9 and abs(anchor.margin - 0.5) < 1e-9

    two = solve_max_margin([[1.0, 0.0], [0.0, 1.0]], [0.75, 0.75])
    np.testing.assert_allclose(two.strategy.weights, [0.5, 0.5], atol=1e-9)
    assert abs(two.margin - 0.25) < 1e-9

    with pytest.raises(SlaterViolationError):
        solve_max_margin([[0.5, 0.5]], [0.5])


def test_max_margin_margin_consistency():
    rng = np.random.default_rng(2)
    for _ in range(50):
        _, cost_means, thresholds, _ = _random_lp_instance(rng)
        try:
            anchor = solve_max_margin(cost_means, thresholds)
        except SlaterViolationError:
            continue
        margins = thresholds - cost_means @ anchor.strategy.weights
        assert np.all(margins >= anchor.margin - 1e-8)


def test_feasibility_examples():
    horizon = 100
    omega_only = Polytope(3, (), 1.0 / horizon)
    assert feasibility_check(omega_only)

    contradictory = Polytope(
        3, ((np.array([1.0, 0.0, 0.0]), 1.0 / (2 * horizon)),), 1.0 / horizon
    )
    assert not feasibility_check(contradictory)

    # Optimistic row already satisfied by every simplex point.
    row = (np.array([0.3, 0.1, 0.2]), 0.4 + 3.0 / horizon)
    assert feasibility_check(Polytope(3, (row,), 1.0 / horizon))


def test_feasibility_agrees_with_grid_emptiness():
    rng = np.random.default_rng(17)
    for _ in range(500):
        k = int(rng.integers(2, 4))
        # keep the truncated simplex comfortably wider than the grid pitch
        horizon = int(rng.integers(4 * k, 200))
        floor = 1.0 / horizon if rng.random() < 0.5 else 0.0
        witness = floor + (1.0 - k * floor) * rng.dirichlet(np.ones(k))
        coefs = rng.uniform(-1.0, 1.0, size=(int(rng.integers(1, 3)), k))
        if rng.random() < 0.7:
            bounds = coefs @ witness + rng.uniform(0.01, 0.5, size=coefs.shape[0])
        else:
            # Push one bound below the row's simplex-wide minimum.
            bounds = coefs @ witness + rng.uniform(0.01, 0.5, size=coefs.shape[0])
            bounds[0] = coefs[0].min() - rng.uniform(0.01, 0.3)
        poly = Polytope(k, tuple(zip(coefs, bounds)), floor)
        by_lp = feasibility_check(poly)
        by_grid = grid_oracle(np.zeros(k), poly, 1e-3).status == "optimal"
        assert by_lp == by_grid


def test_grid_oracle_basics():
    poly = Polytope(2, ((np.array([1.0, 0.0]), 0.5),), 0.0)
    best = grid_oracle([0.0, 1.0], poly, 1e-4)
    np.testing.assert_allclose(best.point.weights, [0.5, 0.5], atol=1e-9)

    empty = grid_oracle([0.1, 0.1], Polytope(2, ((np.array([1.0, 1.0]), 0.5),), 0.0), 1e-3)
    assert empty.status == "infeasible"

    flat = grid_oracle([0.0, 0.0], poly, 1e-3)
    assert flat.status == "optimal" and flat.objective == 0.0

    with pytest.raises(ValueError):
        grid_oracle(np.zeros(4), Polytope(4, (), 0.0), 1e-3)
    with pytest.raises(ValueError):
        grid_oracle(np.zeros(2), poly, 0.5)


def test_duality_sanity_no_grid_point_beats_lp():
    rng = np.random.default_rng(29)
    for _ in range(40):
        loss, cost_means, thresholds, k = _random_lp_instance(rng)
        sol = solve_offline_opt(loss, cost_means, thresholds)
        poly = Polytope(k, tuple(zip(cost_means, thresholds)), 0.0)
        grid = grid_oracle(loss, poly, 1e-3)
        assert sol.status == grid.status
        if sol.status == "optimal":
            # Solution satisfies every row and no grid point undercuts it.
            assert poly.contains(sol.point.weights)
            assert grid.objective >= sol.objective - 1e-3


def test_simplex_solve_unbounded_guard():
    raw = simplex_solve(np.array([-1.0]), a_ub=np.array([[-1.0]]), b_ub=np.array([1.0]))
    assert raw.status == "unbounded"


def test_max_interior_point():
    poly = Polytope(2, ((np.array([1.0, 0.0]), 0.5),), 0.01)
    point, slack = max_interior_point(poly)
    assert slack > 0.0
    assert np.all(point >= 0.01 + slack - 1e-9)
    assert point @ [1.0, 0.0] <= 0.5 - slack + 1e-9
