"""Command line entry points: train, eval, plot-data."""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .harness import evaluate, plot_data, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safenav")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train one method on one environment")
    tr.add_argument("--method", choices=["ours", "sac", "sac_lag", "sac_pid", "mpc_tuned"])
    tr.add_argument("--env", type=int, choices=[1, 2, 3])
    tr.add_argument("--seed", type=int)
    tr.add_argument("--steps", type=int)
    tr.add_argument("--config", help="flat key = value config file")
    tr.add_argument("--out", help="output directory (default runs/<method>_env<env>_seed<seed>)")
    tr.add_argument("--ablation-goal-info", action="store_true",
                    help="goal-informed supervisor variant")

    ev = sub.add_parser("eval", help="roll out a checkpoint deterministically")
    ev.add_argument("--checkpoint", help="checkpoint file; omit for a random policy")
    ev.add_argument("--method", help="required when no checkpoint is given")
    ev.add_argument("--env", type=int, choices=[1, 2, 3], required=True)
    ev.add_argument("--episodes", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--max-steps", type=int, help="optional cap on total steps")
    ev.add_argument("--config", help="flat key = value config file")
    ev.add_argument("--out", required=True)

    pl = sub.add_parser("plot-data", help="merge run logs into a mean/std table")
    pl.add_argument("--runs", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "train":
        overrides = {}
        if args.method is not None:
            overrides["run.method"] = args.method
        if args.env is not None:
            overrides["run.env_id"] = args.env
        if args.seed is not None:
            overrides["run.seed"] = args.seed
        if args.steps is not None:
            overrides["run.total_steps"] = args.steps
        if args.ablation_goal_info:
            overrides["run.ablation_goal_info"] = True
        cfg = load_config(args.config, overrides)
        out = args.out or (f"runs/{cfg['run.method']}_env{cfg['run.env_id']}"
                           f"_seed{cfg['run.seed']}")
        summary = run(cfg, out)
        print(json.dumps(summary, indent=2))
    elif args.command == "eval":
        cfg = load_config(args.config)
        summary = evaluate(cfg, args.checkpoint, args.env, args.episodes, args.seed,
                           out_dir=args.out, method=args.method,
                           max_total_steps=args.max_steps)
        print(json.dumps(summary, indent=2))
    else:
        plot_data(args.runs, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
