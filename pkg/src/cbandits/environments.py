"""Loss/cost generators and instance families.

Every generator here is oblivious: sequences are pre-drawn (or file-loaded)
before the run starts, so runs are pure functions of (seed, parameters).
Adversaries that react to the play history enter only through the adaptive
loss-source hook on the instance type; none ship with the library.

Sequence file format (CSV): row t carries the K loss values followed by the
m*K realized cost values, row-major by constraint, under the header
``t,loss_0..loss_{K-1},g_0_0..g_{m-1}_{K-1}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .lp import solve_offline_opt
from .model import InstanceSpec, Strategy


def sample_costs(cost_means, family: str, rng) -> np.ndarray:
    """One i.i.d. draw of the full cost matrix for a single round."""
    means = np.asarray(cost_means, dtype=float)
    if family == "bernoulli":
        return (rng.random(means.shape) < means).astype(float)
    if family == "beta":
        # Beta(2*mu, 2*(1-mu)) matches the requested mean; endpoints are
        # degenerate and returned as constants.
        out = np.empty(means.shape)
        interior = (means > 0.0) & (means < 1.0)
        if np.any(interior):
            mu = means[interior]
            out[interior] = rng.beta(2.0 * mu, 2.0 * (1.0 - mu))
        out[~interior] = means[~interior]
        return out
    raise ValueError(f"unsupported cost family {family!r}")


@dataclass(frozen=True)
class LowerBoundParams:
    """Parameters of the three-action hard-instance family.

    When left unset, the loss perturbation defaults to
    (1/4) * sqrt(omega * (1 - omega) / T) and the cost perturbation to
    (1/6) * sqrt(1 / T).
    """

    omega: float
    rho_lb: float
    delta_gap: float
    horizon: int
    gap_psi: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if not 0.0 < self.omega < 0.5:
            raise ValueError("omega must lie in (0, 1/2)")
        if not 0.0 < self.rho_lb < 0.5:
            raise ValueError("rho_lb must lie in (0, 1/2)")
        if not 0.0 <= self.delta_gap <= 1.0:
            raise ValueError("delta_gap must lie in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.gap_psi is None:
            object.__setattr__(
                self, "gap_psi",
                0.25 * np.sqrt(self.omega * (1.0 - self.omega) / self.horizon),
            )
        if self.eps is None:
            object.__setattr__(self, "eps", (1.0 / 6.0) * np.sqrt(1.0 / self.horizon))
        if not 0.0 < self.omega + self.gap_psi <= 1.0:
            raise ValueError("omega + gap_psi must lie in (0, 1]")
        if not 0.0 < 0.5 + self.eps <= 1.0:
            raise ValueError("eps must keep the unsafe mean in (0, 1]")


# The threshold is implicit in the construction: 1/2 makes the low-cost
# stream strictly safe, the critical stream exactly critical, and the
# inflated stream unsafe -- the only reading under which (0, 0, 1) is the
# unique strictly feasible strategy.
LB_THRESHOLD = 0.5


def lb_instance(variant: int, params: LowerBoundParams, rng):
    """Materialize one of the four hard-instance variants.

    Returns (losses T x 3, costs T x 1 x 3, thresholds).  All five Bernoulli
    streams are drawn in a fixed order regardless of the variant, so the
    variants share streams seed-for-seed and differ only where the table
    says they should.
    """
    if variant not in (1, 2, 3, 4):
        raise ValueError("variant must be in 1..4")
    t_len = params.horizon
    base = (rng.random(t_len) < params.omega).astype(float)           # low-loss stream
    shifted = (rng.random(t_len) < params.omega + params.gap_psi).astype(float)
    critical = (rng.random(t_len) < 0.5).astype(float)                # mean exactly 1/2
    safe = (rng.random(t_len) < 0.5 - params.rho_lb).astype(float)    # strictly safe
    unsafe = (rng.random(t_len) < 0.5 + params.eps).astype(float)

    third = (base + params.delta_gap) / 2.0
    if variant == 1:
        losses = np.column_stack([base / 2.0, base / 2.0, third])
    elif variant == 2:
        losses = np.column_stack([base / 2.0, shifted / 2.0, third])
    elif variant == 3:
        losses = np.column_stack([shifted / 2.0, base / 2.0, third])
    else:
        losses = np.column_stack([shifted / 2.0, shifted / 2.0, third])

    if variant == 1:
        cost_row = np.column_stack([unsafe, unsafe, safe])
    else:
        cost_row = np.column_stack([critical, critical, safe])
    costs = cost_row[:, None, :]
    return losses, costs, np.array([LB_THRESHOLD])


def lb_cost_means(variant: int, params: LowerBoundParams) -> np.ndarray:
    if variant == 1:
        return np.array([[0.5 + params.eps, 0.5 + params.eps, 0.5 - params.rho_lb]])
    return np.array([[0.5, 0.5, 0.5 - params.rho_lb]])


def lb_instance_spec(variant: int, params: LowerBoundParams, rng,
                     confidence: float = 0.05) -> InstanceSpec:
    losses, costs, thresholds = lb_instance(variant, params, rng)
    return InstanceSpec(
        num_actions=3,
        num_constraints=1,
        horizon=params.horizon,
        confidence=confidence,
        thresholds=thresholds,
        cost_means=lb_cost_means(variant, params),
        loss_source=("fixed", losses),
        cost_source=("fixed", costs),
        name=f"lower-bound-v{variant}",
    )


@dataclass(frozen=True)
class BallSpec:
    """Constrained small-loss ball: caps the benchmark's average loss and
    the mean squared per-round anchor/benchmark loss gap."""

    omega: float
    delta_gap: float
    horizon: int

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0 or not 0.0 <= self.delta_gap <= 1.0:
            raise ValueError("omega and delta_gap must lie in [0, 1]")


def ball_membership(losses, x_star: Strategy, x_diamond: Strategy,
                    spec: BallSpec, atol: float = 1e-9) -> bool:
    losses = np.asarray(losses, dtype=float)
    t_len = losses.shape[0]
    avg_opt = float(np.sum(losses @ x_star.weights)) / t_len
    gaps = losses @ (x_diamond.weights - x_star.weights)
    avg_sq_gap = float(np.sum(gaps**2)) / t_len
    return avg_opt <= spec.omega + atol and avg_sq_gap <= spec.delta_gap**2 + atol


def smallloss_base_instance(horizon: int, confidence: float) -> InstanceSpec:
    """Benchmark family for the small-loss sweep.

    The benchmark strategy is the safe low-loss action; its loss column is
    the one the level parameter scales, so the benchmark loss is
    proportional to the level by construction.  The rejected actions carry
    deterministic loss 1: maximal gaps keep their rejection cost small
    relative to the level-dependent part of the regret."""
    return InstanceSpec(
        num_actions=3,
        num_constraints=1,
        horizon=horizon,
        confidence=confidence,
        thresholds=np.array([0.5]),
        cost_means=np.array([[0.8, 0.3, 0.2]]),
        loss_source=("bernoulli", np.array([1.0, 0.2, 1.0])),
        cost_source=("sampled", "bernoulli"),
        name="smallloss-base",
    )


def smallloss_family(level: float, base: InstanceSpec, rng):
    """Scale the benchmark-support losses so the benchmark loss is
    proportional to `level`.

    Materializes the base losses, finds the benchmark support on the
    realized mean loss, scales those columns by `level`, and reports the
    realized benchmark loss of the scaled sequence via the LP oracle.
    Returns (instance with fixed losses, realized benchmark loss).
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError("level must lie in [0, 1]")
    losses = base.materialize_losses(rng)
    mean_loss = losses.mean(axis=0)
    sol = solve_offline_opt(mean_loss, base.cost_means, base.thresholds)
    if sol.status != "optimal":
        raise ValueError("base instance has no feasible benchmark")
    support = sol.point.weights > 1e-9
    scaled = losses.copy()
    scaled[:, support] *= level
    scaled_sol = solve_offline_opt(scaled.mean(axis=0), base.cost_means, base.thresholds)
    realized = float(scaled_sol.objective * base.horizon)
    instance = InstanceSpec(
        num_actions=base.num_actions,
        num_constraints=base.num_constraints,
        horizon=base.horizon,
        confidence=base.confidence,
        thresholds=base.thresholds,
        cost_means=base.cost_means,
        loss_source=("fixed", scaled),
        cost_source=base.cost_source,
        name=f"{base.name}-level{level:g}",
    )
    return instance, realized


def violation_stress_instance(horizon: int, confidence: float) -> InstanceSpec:
    """Two actions, one constraint; the low-loss action is the costly one.

    The cost gap is maximal and the loss pushes hard into the costly
    action, so the iterate rides the optimistic boundary of the estimated
    safe space from early on and violations are governed by the shrinking
    confidence radii -- the radius-driven regime the violation analysis
    describes."""
    return InstanceSpec(
        num_actions=2,
        num_constraints=1,
        horizon=horizon,
        confidence=confidence,
        thresholds=np.array([0.05]),
        cost_means=np.array([[1.0, 0.0]]),
        loss_source=("bernoulli", np.array([0.0, 1.0])),
        cost_source=("sampled", "bernoulli"),
        name="violation-stress",
    )


def safety_stress_instance(horizon: int, confidence: float) -> InstanceSpec:
    """Three actions, one constraint, anchor margin exactly 0.2."""
    return InstanceSpec(
        num_actions=3,
        num_constraints=1,
        horizon=horizon,
        confidence=confidence,
        thresholds=np.array([0.5]),
        cost_means=np.array([[0.7, 0.5, 0.3]]),
        loss_source=("bernoulli", np.array([0.1, 0.9, 0.6])),
        cost_source=("sampled", "bernoulli"),
        name="safety-stress",
    )


def sequence_header(num_actions: int, num_constraints: int):
    cols = ["t"]
    cols += [f"loss_{a}" for a in range(num_actions)]
    cols += [f"g_{i}_{a}" for i in range(num_constraints) for a in range(num_actions)]
    return cols


def write_sequence_csv(path, losses, costs):
    losses = np.asarray(losses, dtype=float)
    costs = np.asarray(costs, dtype=float)
    t_len, k = losses.shape
    m = costs.shape[1]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(sequence_header(k, m))
        for t in range(t_len):
            row = [t + 1]
            row += [repr(float(v)) for v in losses[t]]
            row += [repr(float(v)) for v in costs[t].reshape(-1)]
            writer.writerow(row)


def read_sequence_csv(path):
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        k = sum(1 for c in header if c.startswith("loss_"))
        m = sum(1 for c in header if c.startswith("g_")) // k
        losses, costs = [], []
        for row in reader:
            values = [float(v) for v in row[1:]]
            losses.append(values[:k])
            costs.append(np.asarray(values[k:]).reshape(m, k))
    return np.asarray(losses), np.asarray(costs)
