"""Command-line interface.

Subcommands
-----------
simulate        run an experiment described by a JSON config file
table1          ten-arm logistic/gamma comparison of the depth-1 policies
figure3         lookahead Thompson sampling with the optimistic planner
posterior-dump  per-arm posterior mean/sd tables at checkpoint rounds

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .exceptions import ConfigError, RecobanditsError
from .harness import (
    ExperimentConfig,
    run_batch,
    run_episode,
    write_batch_outputs,
    write_rows_csv,
    write_sidecar,
)
from .presets import (
    figure3_experiment,
    posterior_dump_experiment,
    table1_experiments,
)


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recobandits",
        description="Recovering-bandits simulations: GP recovery curves, lookahead policies, regret accounting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run an experiment from a JSON config file")
    p_sim.add_argument("--config", required=True, help="path to the experiment JSON file")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.add_argument("--stem", default="simulate", help="output file stem")
    p_sim.add_argument("--workers", type=int, default=None, help="worker processes")
    p_sim.set_defaults(func=_cmd_simulate)

    p_t1 = sub.add_parser("table1", help="desk-scale ten-arm parametric comparison")
    p_t1.add_argument("--setting", required=True, choices=("logistic", "gamma"))
    p_t1.add_argument("--reps", type=int, default=100, help="replications per policy")
    p_t1.add_argument("--seed", type=int, default=1, help="master seed")
    p_t1.add_argument("--out", default=".", help="output directory")
    p_t1.add_argument("--workers", type=int, default=None, help="worker processes")
    p_t1.set_defaults(func=_cmd_table1)

    p_f3 = sub.add_parser("figure3", help="lookahead TS with budgeted optimistic planning")
    p_f3.add_argument("--k", type=int, default=10, help="number of arms")
    p_f3.add_argument("--d", type=int, default=4, help="lookahead depth")
    p_f3.add_argument("--budgets", type=_int_list, default=[100, 300, 1000, 2000])
    p_f3.add_argument("--reps", type=int, default=10)
    p_f3.add_argument("--seed", type=int, default=1)
    p_f3.add_argument("--horizon", type=int, default=1000)
    p_f3.add_argument("--lengthscale", type=float, default=4.0)
    p_f3.add_argument(
        "--include-exhaustive",
        action="store_true",
        help="also run the exhaustive planner as a reference row",
    )
    p_f3.add_argument("--out", default=".", help="output directory")
    p_f3.add_argument("--workers", type=int, default=None, help="worker processes")
    p_f3.set_defaults(func=_cmd_figure3)

    p_pd = sub.add_parser("posterior-dump", help="posterior mean/sd tables at checkpoints")
    p_pd.add_argument("--t", type=_int_list, default=[10, 100, 1000], help="checkpoint rounds")
    p_pd.add_argument("--seed", type=int, default=1)
    p_pd.add_argument("--out", default=".", help="output directory")
    p_pd.set_defaults(func=_cmd_posterior_dump)
    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"config file not found: {config_path}", file=sys.stderr)
        return 2
    try:
        payload = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        print(f"config file {config_path} is not valid JSON: {exc}", file=sys.stderr)
        return 2
    cfg = ExperimentConfig.from_dict(payload)
    result = run_batch(cfg, n_workers=args.workers)
    paths = write_batch_outputs(result, args.out, args.stem)
    mean, lo, hi = result.mean_ci(result.total_rewards)
    print(f"{cfg.policy.label}: total reward {mean:.3f} [{lo:.3f}, {hi:.3f}] over {cfg.replications} reps")
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_table1(args: argparse.Namespace) -> int:
    experiments = table1_experiments(args.setting, args.reps, args.seed)
    rows = []
    for cfg in experiments:
        result = run_batch(cfg, n_workers=args.workers)
        mean, lo, hi = result.mean_ci(result.total_rewards)
        rows.append([cfg.policy.label, mean, lo, hi])
    stem = f"table1_{args.setting}"
    csv_path = write_rows_csv(
        Path(args.out) / f"{stem}.csv", ["policy", "mean_reward", "ci_lo", "ci_hi"], rows
    )
    sidecar = write_sidecar(
        Path(args.out) / f"{stem}.json", {"experiments": [c.to_dict() for c in experiments]}
    )
    for row in rows:
        print(f"{row[0]}: {row[1]:.3f} [{row[2]:.3f}, {row[3]:.3f}]")
    print(f"wrote {csv_path}")
    print(f"wrote {sidecar}")
    return 0


def _cmd_figure3(args: argparse.Namespace) -> int:
    rows = []
    configs = []
    budgets: list[int | None] = list(args.budgets)
    if args.include_exhaustive:
        budgets.append(None)
    for budget in budgets:
        cfg = figure3_experiment(
            n_arms=args.k,
            d=args.d,
            budget=budget,
            reps=args.reps,
            seed=args.seed,
            horizon=args.horizon,
            lengthscale=args.lengthscale,
        )
        configs.append(cfg)
        result = run_batch(cfg, n_workers=args.workers)
        rewards = result.total_rewards
        mean_reward = sum(rewards) / len(rewards)
        depth_means = [r.mean_plan_depth for r in result.replications]
        depth_finals = [r.final_plan_depth for r in result.replications]
        if budget is None:
            planner, budget_field = "exhaustive", ""
            mean_depth = mean_final = float(args.d)
        else:
            planner, budget_field = "optimistic", budget
            mean_depth = sum(depth_means) / len(depth_means)
            mean_final = sum(depth_finals) / len(depth_finals)
        rows.append([planner, budget_field, mean_reward, mean_depth, mean_final])
    csv_path = write_rows_csv(
        Path(args.out) / "figure3.csv",
        ["planner", "budget", "mean_total_reward", "mean_plan_depth", "mean_final_depth"],
        rows,
    )
    sidecar = write_sidecar(
        Path(args.out) / "figure3.json", {"experiments": [c.to_dict() for c in configs]}
    )
    for row in rows:
        print(
            f"{row[0]:>10} budget={row[1]!s:>6}: reward {row[2]:.3f}, "
            f"mean depth {row[3]:.3f}, final depth {row[4]:.3f}"
        )
    print(f"wrote {csv_path}")
    print(f"wrote {sidecar}")
    return 0


def _cmd_posterior_dump(args: argparse.Namespace) -> int:
    checkpoints = sorted(set(args.t))
    if not checkpoints or checkpoints[0] < 1:
        print("checkpoints must be positive rounds", file=sys.stderr)
        return 2
    cfg = posterior_dump_experiment(args.seed, horizon=max(checkpoints))
    rows = []

    def hook(t: int, policy) -> None:
        if t not in checkpoints:
            return
        for arm, post in enumerate(policy.posterior_snapshot()):
            for z in range(cfg.env.z_max + 1):
                mean, var = post.mean_var(z)
                rows.append([t, arm, z, mean, math.sqrt(max(var, 0.0))])

    run_episode(cfg, rep=0, round_hook=hook)
    csv_path = write_rows_csv(
        Path(args.out) / "posterior_dump.csv", ["t", "arm", "z", "mean", "sd"], rows
    )
    sidecar = write_sidecar(Path(args.out) / "posterior_dump.json", cfg.to_dict())
    print(f"wrote {csv_path}")
    print(f"wrote {sidecar}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RecobanditsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort diagnostic
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
