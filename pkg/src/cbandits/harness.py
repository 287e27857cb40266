"""Experiment orchestration: seeded runs, metrics, sweeps, file outputs.

A run is a pure function of (config, seed): the instance streams are
materialized from the seed's generator before the interaction loop starts,
and the same generator then drives action sampling and any empty-space
fallback draws.  Seeds execute in parallel worker processes; results are
merged in seed order, so outputs are deterministic regardless of
scheduling.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algorithms import (
    ColbLearner,
    DoublingLearner,
    SolbLearner,
    theoretical_eta,
)
from .environments import (
    LowerBoundParams,
    lb_instance_spec,
    read_sequence_csv,
    safety_stress_instance,
    smallloss_base_instance,
    smallloss_family,
    violation_stress_instance,
)
from .errors import ConfigError, ConvergenceError, InfeasibleError
from .lp import solve_max_margin, solve_offline_opt
from .model import InstanceSpec, RoundRecord, sample_action

ALGORITHMS = ("colb", "solb", "colb-doubling", "solb-doubling")
SAFETY_ATOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    instance: dict
    algorithm: str = "colb"
    eta: object = "oracle"  # "oracle" | "doubling" | explicit float
    seeds: tuple = (0,)
    output: str | None = None
    keep_trajectory: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if isinstance(self.eta, str):
            if self.eta not in ("oracle", "doubling"):
                raise ConfigError(f"unknown eta mode {self.eta!r}")
        elif not isinstance(self.eta, (int, float)) or self.eta <= 0:
            raise ConfigError("explicit eta must be a positive number")
        if self.algorithm.endswith("-doubling") and self.eta == "oracle":
            object.__setattr__(self, "eta", "doubling")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("need at least one seed")

    @property
    def base_algorithm(self) -> str:
        return self.algorithm.split("-")[0]

    @property
    def doubling(self) -> bool:
        return self.algorithm.endswith("-doubling") or self.eta == "doubling"


@dataclass
class RunMetrics:
    seed: int
    regret_cum: np.ndarray
    regret_sampled_cum: np.ndarray
    violation_cum: np.ndarray
    safety_breach_round: int | None
    clean_event_ok: bool
    eta_final: np.ndarray
    eta_max_curve: np.ndarray
    mix_weights: np.ndarray
    safe_empty: np.ndarray
    opt_value: float
    benchmark_loss: float
    eta_base: float
    eta_max_ratio: float
    max_kkt_residual: float
    empty_rounds: int
    restarts: int
    trajectory: dict | None = field(default=None, repr=False)

    @property
    def regret_final(self) -> float:
        return float(self.regret_cum[-1]) if self.regret_cum.size else 0.0

    @property
    def violation_final(self) -> float:
        return float(self.violation_cum[-1]) if self.violation_cum.size else 0.0

    def summary_row(self) -> dict:
        sampled = float(self.regret_sampled_cum[-1]) if self.regret_sampled_cum.size else 0.0
        return {
            "seed": self.seed,
            "regret_final": self.regret_final,
            "regret_sampled_final": sampled,
            "violation_final": self.violation_final,
            "safety_breach_round": self.safety_breach_round,
            "clean_event_ok": bool(self.clean_event_ok),
            "opt_value": self.opt_value,
            "benchmark_loss": self.benchmark_loss,
            "eta_base": self.eta_base,
            "eta_max_ratio": self.eta_max_ratio,
            "max_kkt_residual": self.max_kkt_residual,
            "empty_rounds": self.empty_rounds,
            "restarts": self.restarts,
        }


def build_instance(cfg, rng) -> InstanceSpec:
    """Instantiate the instance block of a config for one seeded run."""
    if isinstance(cfg, InstanceSpec):
        return cfg
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("instance config must be a mapping with a 'kind'")
    kind = cfg["kind"]
    known = {
        "bernoulli": {"kind", "loss_means", "cost_means", "thresholds",
                      "horizon", "confidence", "cost_family"},
        "fixed": {"kind", "losses", "cost_means", "thresholds",
                  "horizon", "confidence", "cost_family"},
        "file": {"kind", "path", "cost_means", "thresholds", "confidence"},
        "lower-bound": {"kind", "variant", "omega", "rho", "delta_gap",
                        "horizon", "confidence"},
        "smallloss": {"kind", "level", "horizon", "confidence"},
        "violation-stress": {"kind", "horizon", "confidence"},
        "safety-stress": {"kind", "horizon", "confidence"},
    }
    if kind not in known:
        raise ConfigError(f"unknown instance kind {kind!r}")
    extra = set(cfg) - known[kind]
    if extra:
        raise ConfigError(f"unknown instance fields {sorted(extra)!r}")
    confidence = cfg.get("confidence", 0.05)

    if kind == "bernoulli" or kind == "fixed":
        cost_means = np.asarray(cfg["cost_means"], dtype=float)
        m, k = cost_means.shape
        if kind == "bernoulli":
            loss_source = ("bernoulli", np.asarray(cfg["loss_means"], dtype=float))
            horizon = int(cfg["horizon"])
        else:
            losses = np.asarray(cfg["losses"], dtype=float)
            loss_source = ("fixed", losses)
            horizon = int(cfg.get("horizon", losses.shape[0]))
        return InstanceSpec(
            num_actions=k, num_constraints=m, horizon=horizon,
            confidence=confidence,
            thresholds=np.asarray(cfg["thresholds"], dtype=float),
            cost_means=cost_means,
            loss_source=loss_source,
            cost_source=("sampled", cfg.get("cost_family", "bernoulli")),
            name=kind,
        )
    if kind == "file":
        losses, costs = read_sequence_csv(cfg["path"])
        cost_means = np.asarray(cfg["cost_means"], dtype=float)
        return InstanceSpec(
            num_actions=losses.shape[1], num_constraints=costs.shape[1],
            horizon=losses.shape[0], confidence=confidence,
            thresholds=np.asarray(cfg["thresholds"], dtype=float),
            cost_means=cost_means,
            loss_source=("fixed", losses),
            cost_source=("fixed", costs),
            name=os.path.basename(str(cfg["path"])),
        )
    if kind == "lower-bound":
        params = LowerBoundParams(
            omega=float(cfg.get("omega", 0.25)),
            rho_lb=float(cfg.get("rho", 0.2)),
            delta_gap=float(cfg.get("delta_gap", 0.3)),
            horizon=int(cfg["horizon"]),
        )
        return lb_instance_spec(int(cfg.get("variant", 2)), params, rng, confidence)
    if kind == "smallloss":
        base = smallloss_base_instance(int(cfg["horizon"]), confidence)
        instance, _ = smallloss_family(float(cfg.get("level", 1.0)), base, rng)
        return instance
    if kind == "violation-stress":
        return violation_stress_instance(int(cfg["horizon"]), confidence)
    return safety_stress_instance(int(cfg["horizon"]), confidence)


def compute_regret(records, losses, cost_means, thresholds):
    """Cumulative regret curves against the hindsight benchmark.

    The primary curve uses the expected per-round loss of the played
    strategy (low variance); the sampled-loss variant is returned alongside.
    Returns (expected_curve, sampled_curve, benchmark_solution).
    """
    losses = np.asarray(losses, dtype=float)
    benchmark = solve_offline_opt(losses.mean(axis=0), cost_means, thresholds)
    if benchmark.status != "optimal":
        raise InfeasibleError("offline benchmark is infeasible")
    opt = benchmark.objective
    if not records:
        empty = np.zeros(0)
        return empty, empty, benchmark
    played = np.stack([r.strategy_played.weights for r in records])
    expected = np.einsum("ta,ta->t", losses, played)
    sampled = np.array([r.loss_observed for r in records])
    steps = np.arange(1, len(records) + 1)
    return np.cumsum(expected) - steps * opt, np.cumsum(sampled) - steps * opt, benchmark


def compute_violations(records, cost_means, thresholds):
    """Worst-constraint running sum of positive expected-cost excesses."""
    if not records:
        return np.zeros(0)
    expected = np.stack([r.expected_costs_played for r in records])
    excess = np.maximum(expected - np.asarray(thresholds)[None, :], 0.0)
    return np.max(np.cumsum(excess, axis=0), axis=1)


def _resolve_eta(config: RunConfig, spec: InstanceSpec, benchmark_loss, anchor):
    mode = "hard" if config.base_algorithm == "solb" else "soft"
    margin = anchor.margin if anchor is not None else 0.0

    def for_guess(guess):
        return theoretical_eta(mode, margin, spec.horizon, spec.confidence,
                               spec.num_actions, guess)

    if config.doubling:
        return None, for_guess
    if config.eta == "oracle":
        return for_guess(benchmark_loss), None
    return float(config.eta), None


def _build_learner(config: RunConfig, spec: InstanceSpec, anchor, base_rate, for_guess):
    kwargs = dict(
        num_actions=spec.num_actions,
        num_constraints=spec.num_constraints,
        horizon=spec.horizon,
        confidence=spec.confidence,
        thresholds=spec.thresholds,
    )
    if config.base_algorithm == "solb":
        factory = lambda rate: SolbLearner(anchor=anchor, base_rate=rate, **kwargs)
    else:
        factory = lambda rate: ColbLearner(base_rate=rate, **kwargs)
    if for_guess is not None:
        return DoublingLearner(factory(for_guess(1.0)), for_guess)
    return factory(base_rate)


def run_single(config: RunConfig, seed: int) -> RunMetrics:
    """Execute one seeded run of the configured algorithm and instance."""
    rng = np.random.default_rng(seed)
    spec = build_instance(config.instance, rng)
    adaptive = spec.adaptive
    horizon = spec.horizon
    if adaptive:
        if config.eta == "oracle":
            raise ConfigError("adaptive losses cannot be paired with the oracle "
                              "rate (the benchmark loss is only known in hindsight)")
        losses = np.empty((horizon, spec.num_actions))
        adversary = spec.loss_source[1]
        history = {"strategies": [], "actions": [], "losses": []}
        benchmark_loss = float("nan")
    else:
        losses = spec.materialize_losses(rng)
        benchmark = solve_offline_opt(losses.mean(axis=0), spec.cost_means,
                                      spec.thresholds)
        if benchmark.status != "optimal":
            raise InfeasibleError("instance violates the setting's premise: no "
                                  "strategy satisfies the thresholds in expectation")
        benchmark_loss = benchmark.objective * horizon
    costs = spec.materialize_costs(rng)

    anchor = None
    if config.base_algorithm == "solb":
        anchor = solve_max_margin(spec.cost_means, spec.thresholds)

    base_rate, for_guess = _resolve_eta(config, spec, benchmark_loss, anchor)
    learner = _build_learner(config, spec, anchor, base_rate, for_guess)

    records = []
    eta_max_curve = np.empty(horizon)
    omd_trajectory = np.empty((horizon, spec.num_actions)) if config.keep_trajectory else None
    clean_ok = True
    thresholds = spec.thresholds

    for t in range(horizon):
        strategy = learner.strategy
        mix_weight = learner.mix_weight
        if omd_trajectory is not None:
            omd_trajectory[t] = learner.omd_strategy.weights
        if adaptive:
            row = np.asarray(adversary(t + 1, history), dtype=float)
            if row.shape != (spec.num_actions,) or row.min() < 0 or row.max() > 1:
                raise ConfigError("adaptive adversary must return a loss vector "
                                  "with one [0, 1] entry per action")
            losses[t] = row
        action = sample_action(strategy, rng)
        loss_t = float(losses[t, action])
        costs_t = costs[t, :, action]
        try:
            learner.observe(action, loss_t, costs_t, rng)
        except ConvergenceError as err:
            raise ConvergenceError(str(err), round_index=t + 1) from err
        eta_max_curve[t] = learner.sched.rates.max()
        if clean_ok:
            est = learner.estimator
            column = est.cost_sums[:, action] / max(1, est.counts[action])
            if np.any(np.abs(column - spec.cost_means[:, action]) > est.radii[action] + 1e-12):
                clean_ok = False
        records.append(RoundRecord(
            t=t + 1,
            action=action,
            loss_observed=loss_t,
            costs_observed=costs_t,
            strategy_played=strategy,
            mix_weight=mix_weight,
            safe_space_empty=bool(learner.state.last_space_empty),
            expected_costs_played=spec.cost_means @ strategy.weights,
        ))
        if adaptive:
            history["strategies"].append(strategy)
            history["actions"].append(action)
            history["losses"].append(loss_t)

    regret_cum, regret_sampled, benchmark = compute_regret(
        records, losses, spec.cost_means, thresholds
    )
    benchmark_loss = benchmark.objective * horizon
    violation_cum = compute_violations(records, spec.cost_means, thresholds)
    expected = np.stack([r.expected_costs_played for r in records])
    breaches = np.any(expected > thresholds[None, :] + SAFETY_ATOL, axis=1)
    breach_round = int(np.argmax(breaches)) + 1 if np.any(breaches) else None

    trajectory = None
    if config.keep_trajectory:
        trajectory = {
            "losses": losses,
            "played": np.stack([r.strategy_played.weights for r in records]),
            "omd": omd_trajectory,
            "mix_weights": np.array([r.mix_weight for r in records]),
            "benchmark": benchmark.point.weights,
            "anchor": anchor.strategy.weights if anchor is not None else None,
        }

    sched = learner.sched
    return RunMetrics(
        seed=seed,
        regret_cum=regret_cum,
        regret_sampled_cum=regret_sampled,
        violation_cum=violation_cum,
        safety_breach_round=breach_round,
        clean_event_ok=clean_ok,
        eta_final=np.asarray(sched.rates),
        eta_max_curve=eta_max_curve,
        mix_weights=np.array([r.mix_weight for r in records]),
        safe_empty=np.array([r.safe_space_empty for r in records], dtype=bool),
        opt_value=float(benchmark.objective),
        benchmark_loss=float(benchmark_loss),
        eta_base=float(sched.base_rate),
        eta_max_ratio=float(sched.max_ratio),
        max_kkt_residual=float(learner.max_kkt_residual),
        empty_rounds=int(learner.empty_rounds),
        restarts=int(getattr(learner, "restarts", 0)),
        trajectory=trajectory,
    )


def _run_seed(payload):
    config, seed = payload
    return run_single(config, seed)


def run(config: RunConfig, workers: int | None = None):
    """Run every configured seed; one RunMetrics per seed, seed order."""
    seeds = config.seeds
    workers = workers if workers is not None else config.workers
    if workers is None:
        workers = min(len(seeds), os.cpu_count() or 1)
    if workers <= 1 or len(seeds) == 1:
        return [run_single(config, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, math.ceil(len(seeds) / (4 * workers)))
        results = list(pool.map(_run_seed, [(config, s) for s in seeds], chunksize=chunk))
    return results


def _median(values):
    return float(np.median(np.asarray(values, dtype=float)))


def _loglog_slope(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2 or np.ptp(np.log(xs[keep])) < 1e-12:
        return None
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])


@dataclass
class SweepResult:
    vary: str
    values: tuple
    table: list  # dict rows, one per (value, seed)
    medians: list  # dict rows, one per value
    violation_slope: float | None
    regret_slope: float | None


def sweep(config: RunConfig, values, seed_count: int | None = None,
          vary: str = "horizon", workers: int | None = None) -> SweepResult:
    """Scaling study over horizons (or small-loss levels).

    Aggregates per-value medians and fits log-log slopes of median regret
    against the realized benchmark loss and of median violations against
    the horizon.
    """
    if vary not in ("horizon", "level"):
        raise ConfigError("sweep can vary 'horizon' or 'level'")
    seeds = config.seeds if seed_count is None else tuple(range(seed_count))
    table, medians = [], []
    for value in values:
        instance = dict(config.instance)
        instance[vary] = value
        sub = RunConfig(instance=instance, algorithm=config.algorithm,
                        eta=config.eta, seeds=seeds,
                        keep_trajectory=False, workers=config.workers)
        results = run(sub, workers=workers)
        for res in results:
            row = {"vary": vary, "value": value}
            row.update(res.summary_row())
            table.append(row)
        medians.append({
            "value": value,
            "regret_median": _median([r.regret_final for r in results]),
            "violation_median": _median([r.violation_final for r in results]),
            "benchmark_loss_median": _median([r.benchmark_loss for r in results]),
            "horizon": value if vary == "horizon" else config.instance.get("horizon"),
        })
    violation_slope = None
    if vary == "horizon" and len(values) >= 2:
        violation_slope = _loglog_slope(
            [m["value"] for m in medians], [m["violation_median"] for m in medians]
        )
    regret_slope = None
    if len(values) >= 2:
        regret_slope = _loglog_slope(
            [m["benchmark_loss_median"] for m in medians],
            [m["regret_median"] for m in medians],
        )
    return SweepResult(vary=vary, values=tuple(values), table=table,
                       medians=medians, violation_slope=violation_slope,
                       regret_slope=regret_slope)


def _rounds_rows(metrics: RunMetrics):
    t_len = metrics.regret_cum.size
    for t in range(t_len):
        yield {
            "t": t + 1,
            "regret_cum": repr(float(metrics.regret_cum[t])),
            "violation_cum": repr(float(metrics.violation_cum[t])),
            "gamma": repr(float(metrics.mix_weights[t])),
            "eta_max": repr(float(metrics.eta_max_curve[t])),
            "safe_empty": int(metrics.safe_empty[t]),
        }


ROUNDS_COLUMNS = ("t", "regret_cum", "violation_cum", "gamma", "eta_max", "safe_empty")


def emit_outputs(results, out_dir, config: RunConfig | None = None,
                 make_plot: bool = True):
    """Write rounds.csv (+ per-seed files), summary.json, and plot.svg."""
    import csv as _csv

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for idx, metrics in enumerate(results):
        name = "rounds.csv" if idx == 0 else f"rounds_seed{metrics.seed}.csv"
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as handle:
            writer = _csv.DictWriter(handle, fieldnames=ROUNDS_COLUMNS)
            writer.writeheader()
            for row in _rounds_rows(metrics):
                writer.writerow(row)
        written.append(path)

    aggregate = {}
    if results:
        aggregate = {
            "regret_median": _median([r.regret_final for r in results]),
            "violation_median": _median([r.violation_final for r in results]),
            "breach_fraction": float(np.mean([r.safety_breach_round is not None
                                              for r in results])),
            "clean_event_fraction": float(np.mean([r.clean_event_ok for r in results])),
            "max_eta_ratio": max(r.eta_max_ratio for r in results),
            "max_kkt_residual": max(r.max_kkt_residual for r in results),
        }
    summary = {
        "config": _config_dict(config),
        "seeds": [r.summary_row() for r in results],
        "aggregate": aggregate,
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2)
    written.append(summary_path)

    if make_plot and results:
        from .plotting import save_run_figure

        written.append(save_run_figure(results, os.path.join(out_dir, "plot.svg")))
    return written


def emit_sweep_outputs(result: SweepResult, out_dir, config: RunConfig | None = None,
                       make_plot: bool = True):
    import csv as _csv

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    columns = ["vary", "value"]
    if result.table:
        columns += [k for k in result.table[0] if k not in ("vary", "value")]
    with open(path, "w", newline="") as handle:
        writer = _csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in result.table:
            writer.writerow(row)
    summary = {
        "config": _config_dict(config),
        "vary": result.vary,
        "values": list(result.values),
        "medians": result.medians,
        "violation_slope": result.violation_slope,
        "regret_slope": result.regret_slope,
    }
    summary_path = os.path.join(out_dir, "sweep_summary.json")
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2)
    written = [path, summary_path]
    if make_plot and result.medians:
        from .plotting import save_sweep_figure

        written.append(save_sweep_figure(result, os.path.join(out_dir, "sweep.svg")))
    return written


def _config_dict(config: RunConfig | None):
    if config is None:
        return None
    instance = config.instance
    if not isinstance(instance, dict):
        instance = {"kind": "inline", "name": getattr(instance, "name", "instance")}
    return {
        "instance": instance,
        "algorithm": config.algorithm,
        "eta": config.eta,
        "seeds": list(config.seeds),
        "output": config.output,
    }


def load_config(path) -> RunConfig:
    """Parse a JSON run config; unknown fields are rejected."""
    with open(path) as handle:
        raw = json.load(handle)
    known = {"instance", "algorithm", "eta", "seeds", "output",
             "keep_trajectory", "workers"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config fields {sorted(extra)!r}")
    if "instance" not in raw:
        raise ConfigError("config needs an 'instance' block")
    return RunConfig(
        instance=raw["instance"],
        algorithm=raw.get("algorithm", "colb"),
        eta=raw.get("eta", "oracle"),
        seeds=tuple(raw.get("seeds", (0,))),
        output=raw.get("output"),
        keep_trajectory=bool(raw.get("keep_trajectory", False)),
        workers=raw.get("workers"),
    )
