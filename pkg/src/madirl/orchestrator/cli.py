"""Command-line interface.

Subcommands: train-expert, gen-demos, random-baseline, train-irl, retrain,
eval, report. Flags given on the command line override the --config file.
The MADIRL_THREADS environment variable caps rollout worker count.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..errors import MadirlError
from .config import DISC_VARIANTS, ExperimentConfig
from . import runner


def _add_common(p, algorithm):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--env", help="environment id")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--episodes", type=int, help="episode budget")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(algorithm=algorithm)


def _config_from(args, **extra):
    overrides = {"env": args.env, "seed": args.seed, "episodes": args.episodes,
                 "algorithm": args.algorithm}
    overrides.update(extra)
    return ExperimentConfig.from_sources(args.config, **overrides)


def _print_record(record):
    print(json.dumps(record, indent=1, sort_keys=True, default=str))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="madirl",
        description="Multi-agent inverse reinforcement learning with attention critics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-expert", help="train expert policies on the "
                                            "environment's own rewards")
    _add_common(p, "expert-maac")
    p.add_argument("--stop-score", type=float,
                   help="stop once greedy mean score reaches this value")

    p = sub.add_parser("gen-demos", help="record greedy expert episodes to a .demos file")
    p.add_argument("--env", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--expert-ckpt", required=True, help="expert checkpoint archive")
    p.add_argument("--count", type=int, default=50, help="number of episodes")
    p.add_argument("--out", required=True, help="output .demos path")

    p = sub.add_parser("random-baseline", help="mean scores under uniform random actions")
    p.add_argument("--env", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--out", help="optional JSON output path")

    p = sub.add_parser("train-irl", help="adversarial reward/policy learning "
                                         "from demonstrations")
    _add_common(p, None)
    p.add_argument("--demos", required=True, help=".demos file")
    p.add_argument("--disc", choices=sorted(DISC_VARIANTS),
                   help="discriminator form (dec|cen|cen-obs)")
    p.add_argument("--algo", choices=("ma-daac", "ma-gail"), default="ma-daac")
    p.add_argument("--stop-nss", type=float,
                   help="stop once the normalized score reaches this value")

    p = sub.add_parser("retrain", help="train fresh policies on an exported reward")
    _add_common(p, "retrain")
    p.add_argument("--reward-export", required=True, help="reward export archive")
    p.add_argument("--reward-source", choices=("learned", "ground_truth", "zero"),
                   help="control switch; default learned")
    p.add_argument("--stop-nss", type=float)

    p = sub.add_parser("eval", help="greedy evaluation of a saved learner")
    p.add_argument("--env", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--demos", help="optional .demos file for normalized scores")

    p = sub.add_parser("report", help="summarize run directories")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", required=True, help="summary output directory")

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train-expert":
            cfg = _config_from(args, early_stop_score=args.stop_score)
            _print_record(runner.train_expert(cfg, args.out))
        elif args.command == "gen-demos":
            demos = runner.generate_demos(args.env, args.expert_ckpt, args.count,
                                          args.seed, args.out)
            _print_record({"demos": args.out, "episodes": len(demos),
                           "mean_scores": demos.meta["mean_scores"]})
        elif args.command == "random-baseline":
            result = runner.random_baseline(args.env, args.seed, args.episodes)
            payload = {"env": args.env, "seed": args.seed,
                       "episodes": result["episodes"],
                       "mean": [float(x) for x in result["mean"]],
                       "sem": [float(x) for x in result["sem"]]}
            if args.out:
                with open(args.out, "w") as f:
                    json.dump(payload, f, indent=1, sort_keys=True)
            _print_record(payload)
        elif args.command == "train-irl":
            cfg = _config_from(args, algorithm=args.algo,
                               disc_variant=DISC_VARIANTS.get(args.disc),
                               early_stop_nss=args.stop_nss)
            _print_record(runner.train_irl(cfg, args.demos, args.out))
        elif args.command == "retrain":
            cfg = _config_from(args, retrain_reward=args.reward_source,
                               early_stop_nss=args.stop_nss)
            _print_record(runner.retrain(cfg, args.reward_export, args.out))
        elif args.command == "eval":
            out = runner.evaluate_checkpoint(args.env, args.ckpt, args.episodes,
                                             args.seed, demos_path=args.demos)
            _print_record({k: (v.tolist() if isinstance(v, np.ndarray) else v)
                           for k, v in out.items()})
        elif args.command == "report":
            from ..evaluation import report

            payload = report(args.runs, args.out)
            print(f"wrote {args.out}/summary.csv and summary.json "
                  f"({len(payload['groups'])} groups, "
                  f"{len(payload['warnings'])} warnings)")
    except MadirlError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
