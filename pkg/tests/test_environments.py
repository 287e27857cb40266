import numpy as np
import pytest

from cbandits.environments import (
    BallSpec,
    LowerBoundParams,
    ball_membership,
    lb_cost_means,
    lb_instance,
    read_sequence_csv,
    sample_costs,
    sequence_header,
    smallloss_base_instance,
    smallloss_family,
    write_sequence_csv,
)
from cbandits.model import Strategy


def test_sample_costs_degenerate_means():
    rng = np.random.default_rng(0)
    means = np.array([[0.0, 1.0]])
    for family in ("bernoulli", "beta"):
        draw = sample_costs(means, family, rng)
        np.testing.assert_array_equal(draw, means)


@pytest.mark.parametrize("family", ["bernoulli", "beta"])
def test_sample_costs_matches_mean(family):
    rng = np.random.default_rng(1)
    means = np.array([[0.3, 0.7]])
    draws = np.stack([sample_costs(means, family, rng) for _ in range(100_000)])
    assert np.all(draws >= 0.0) and np.all(draws <= 1.0)
    assert np.all(np.abs(draws.mean(axis=0) - means) < 0.01)


def test_sample_costs_unknown_family():
    with pytest.raises(ValueError):
        sample_costs(np.array([[0.5]]), "poisson", np.random.default_rng(0))


def test_lower_bound_params_autoset():
    p = LowerBoundParams(omega=0.3, rho_lb=0.2, delta_gap=0.25, horizon=400)
    assert abs(p.gap_psi - 0.25 * np.sqrt(0.3 * 0.7 / 400)) < 1e-15
    assert abs(p.eps - np.sqrt(1.0 / 400) / 6.0) < 1e-15
    with pytest.raises(ValueError):
        LowerBoundParams(omega=0.6, rho_lb=0.2, delta_gap=0.1, horizon=10)


def test_lb_instance_variant_one_zero_gap():
    params = LowerBoundParams(omega=0.25, rho_lb=0.2, delta_gap=0.0, horizon=300)
    losses, costs, thresholds = lb_instance(1, params, np.random.default_rng(2))
    # All three loss columns coincide when the gap is zero.
    np.testing.assert_array_equal(losses[:, 0], losses[:, 1])
    np.testing.assert_array_equal(losses[:, 0], losses[:, 2])
    assert losses.max() <= 0.5
    assert thresholds[0] == 0.5


def test_lb_variants_share_streams_seed_for_seed():
    params = LowerBoundParams(omega=0.25, rho_lb=0.2, delta_gap=0.3, horizon=500)
    drawn = {v: lb_instance(v, params, np.random.default_rng(7)) for v in (1, 2, 3, 4)}
    l2, c2, _ = drawn[2]
    l4, c4, _ = drawn[4]
    # variants 2 and 4 differ only in the first action's loss stream
    assert not np.array_equal(l2[:, 0], l4[:, 0])
    np.testing.assert_array_equal(l2[:, 1], l4[:, 1])
    np.testing.assert_array_equal(l2[:, 2], l4[:, 2])
    np.testing.assert_array_equal(c2, c4)
    # variant 1 differs from 2 only in the cost columns
    l1, c1, _ = drawn[1]
    np.testing.assert_array_equal(l1[:, 0], l2[:, 0])
    np.testing.assert_array_equal(l1[:, 2], l2[:, 2])
    assert not np.array_equal(c1, c2)
    l3, _, _ = drawn[3]
    np.testing.assert_array_equal(l3[:, 0], l2[:, 1])


def test_lb_instance_cost_means():
    params = LowerBoundParams(omega=0.25, rho_lb=0.2, delta_gap=0.3, horizon=20_000)
    losses, costs, thresholds = lb_instance(2, params, np.random.default_rng(3))
    empirical = costs[:, 0, :].mean(axis=0)
    np.testing.assert_allclose(empirical, lb_cost_means(2, params)[0], atol=0.02)
    # safe action sits strictly below the threshold, others exactly at it
    assert lb_cost_means(2, params)[0, 2] == 0.5 - params.rho_lb
    assert np.all(lb_cost_means(2, params)[0, :2] == 0.5)
    assert np.all(losses >= 0.0) and np.all(losses <= 0.5 + params.delta_gap / 2)
    with pytest.raises(ValueError):
        lb_instance(5, params, np.random.default_rng(0))


def test_lb_instance_deterministic():
    params = LowerBoundParams(omega=0.25, rho_lb=0.2, delta_gap=0.3, horizon=100)
    a = lb_instance(2, params, np.random.default_rng(11))
    b = lb_instance(2, params, np.random.default_rng(11))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_ball_membership_cases():
    x_star = Strategy([1.0, 0.0, 0.0])
    x_diamond = Strategy([0.0, 0.0, 1.0])
    horizon = 50
    zeros = np.zeros((horizon, 3))
    assert ball_membership(zeros, x_star, x_diamond, BallSpec(0.0, 0.0, horizon))

    # constant per-round anchor/benchmark gap exactly delta_gap: boundary member
    gap = 0.3
    losses = np.zeros((horizon, 3))
    losses[:, 2] = gap
    assert ball_membership(losses, x_star, x_diamond, BallSpec(0.0, gap, horizon))
    assert not ball_membership(losses, x_star, x_diamond, BallSpec(0.0, gap - 0.01, horizon))

    hot = np.full((horizon, 3), 0.9)
    assert not ball_membership(hot, x_star, x_diamond, BallSpec(0.5, 1.0, horizon))


def test_smallloss_family_levels():
    base = smallloss_base_instance(400, 0.05)
    zero, l0 = smallloss_family(0.0, base, np.random.default_rng(4))
    assert l0 == 0.0
    losses = zero.loss_source[1]
    benchmark_column = losses[:, 1]
    assert not benchmark_column.any()

    full_rng = np.random.default_rng(4)
    full, l1 = smallloss_family(1.0, base, full_rng)
    quarter, lq = smallloss_family(0.25, base, np.random.default_rng(4))
    assert l1 > 0
    assert 0.2 <= lq / l1 <= 0.3

    with pytest.raises(ValueError):
        smallloss_family(1.5, base, np.random.default_rng(0))


def test_sequence_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    losses = rng.random((20, 3))
    costs = rng.random((20, 2, 3))
    path = tmp_path / "seq.csv"
    write_sequence_csv(path, losses, costs)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(sequence_header(3, 2))
    back_losses, back_costs = read_sequence_csv(path)
    np.testing.assert_array_equal(back_losses, losses)
    np.testing.assert_array_equal(back_costs, costs)
