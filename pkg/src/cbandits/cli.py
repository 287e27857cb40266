"""Command-line entry point.

Subcommands: run (single config), sweep (scaling study), lbgen (materialize
the hard-instance families to CSV), verify (built-in oracle/property
checks).  Exit codes: 0 success, 2 config error, 3 Slater/feasibility
rejection, 4 solver convergence failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .environments import LowerBoundParams, lb_cost_means, lb_instance, write_sequence_csv
from .errors import ConfigError, ConvergenceError, InfeasibleError, SlaterViolationError
from .harness import RunConfig, emit_outputs, emit_sweep_outputs, load_config, run, sweep


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cbandits",
        description="Constrained adversarial bandit simulation lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration across its seeds")
    p_run.add_argument("--config", required=True, help="JSON run configuration")
    p_run.add_argument("--output", help="output directory (overrides the config)")
    p_run.add_argument("--workers", type=int, help="parallel worker processes")
    p_run.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    p_sweep = sub.add_parser("sweep", help="scaling study over horizons or levels")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--vary", choices=("horizon", "level"), default="horizon")
    p_sweep.add_argument("--values", nargs="+", type=float, required=True)
    p_sweep.add_argument("--seeds", type=int, help="number of seeds per value")
    p_sweep.add_argument("--output", help="output directory (overrides the config)")
    p_sweep.add_argument("--workers", type=int)
    p_sweep.add_argument("--no-plot", action="store_true")

    p_lb = sub.add_parser("lbgen", help="materialize hard-instance sequences to CSV")
    p_lb.add_argument("--variant", default="all", help="1..4 or 'all'")
    p_lb.add_argument("--horizon", type=int, required=True)
    p_lb.add_argument("--omega", type=float, default=0.25)
    p_lb.add_argument("--rho", type=float, default=0.2)
    p_lb.add_argument("--delta-gap", type=float, default=0.3)
    p_lb.add_argument("--seed", type=int, default=0)
    p_lb.add_argument("--output", required=True, help="output directory")

    sub.add_parser("verify", help="run the built-in oracle/property checks")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    out_dir = args.output or config.output or "cbandits-out"
    results = run(config, workers=args.workers)
    written = emit_outputs(results, out_dir, config, make_plot=not args.no_plot)
    for path in written:
        print(path)
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    out_dir = args.output or config.output or "cbandits-out"
    values = [int(v) if args.vary == "horizon" else float(v) for v in args.values]
    result = sweep(config, values, seed_count=args.seeds, vary=args.vary,
                   workers=args.workers)
    written = emit_sweep_outputs(result, out_dir, config, make_plot=not args.no_plot)
    for path in written:
        print(path)
    if result.violation_slope is not None:
        print(f"violation slope vs horizon: {result.violation_slope:.3f}")
    if result.regret_slope is not None:
        print(f"regret slope vs benchmark loss: {result.regret_slope:.3f}")
    return 0


def _cmd_lbgen(args) -> int:
    if args.variant == "all":
        variants = (1, 2, 3, 4)
    else:
        try:
            variants = (int(args.variant),)
        except ValueError as err:
            raise ConfigError("variant must be 1..4 or 'all'") from err
    params = LowerBoundParams(omega=args.omega, rho_lb=args.rho,
                              delta_gap=args.delta_gap, horizon=args.horizon)
    os.makedirs(args.output, exist_ok=True)
    for variant in variants:
        rng = np.random.default_rng(args.seed)
        losses, costs, _ = lb_instance(variant, params, rng)
        path = os.path.join(args.output, f"lb_v{variant}.csv")
        write_sequence_csv(path, losses, costs)
        means = lb_cost_means(variant, params)[0]
        print(f"{path}  cost means {np.array2string(means, precision=4)}")
    return 0


def _cmd_verify(_args) -> int:
    from .selfcheck import run_all

    return 0 if run_all() else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "lbgen": _cmd_lbgen,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (SlaterViolationError, InfeasibleError) as err:
        print(f"infeasible instance: {err}", file=sys.stderr)
        return 3
    except ConvergenceError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
