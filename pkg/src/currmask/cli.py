"""Command-line entry point.

Subcommands: gen-data, pretrain, eval, report.  Long-form flags only.
Exit codes: 0 success, 2 config error, 3 data/artifact error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import DatasetError
from .learner import NumericsError
from .runner import (
    ArtifactError,
    ConfigError,
    RunConfig,
    dump_config,
    gen_data,
    load_config,
    report,
    run_eval,
    run_pretraining,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="currmask",
        description="Curriculum masked-prediction pretraining toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-data", help="generate a synthetic trajectory dataset")
    p_gen.add_argument("--env", required=True, help="environment id")
    p_gen.add_argument("--episodes", type=int, required=True)
    p_gen.add_argument("--episode-len", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="target dataset directory")
    p_gen.add_argument("--force", action="store_true", help="overwrite a non-empty target")

    p_train = sub.add_parser("pretrain", help="run masked-prediction pretraining")
    p_train.add_argument("--config", help="YAML run configuration")
    p_train.add_argument("--resume", action="store_true", help="continue from the run checkpoint")
    p_train.add_argument("--stop-after", type=int, default=None, help="halt after N steps")
    p_train.add_argument(
        "--print-config", action="store_true", help="dump the fully defaulted config and exit"
    )

    p_eval = sub.add_parser("eval", help="run zero-shot evaluation suites")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--checkpoint", help="model checkpoint file")
    p_eval.add_argument(
        "--replay-oracle", action="store_true", help="score the replay oracle instead of a model"
    )
    p_eval.add_argument("--eval-csv", default=None, help="output CSV (default <out_dir>/eval.csv)")

    p_report = sub.add_parser("report", help="tabulate an eval.csv")
    p_report.add_argument("--eval-csv", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen-data":
            out = gen_data(
                args.env, args.episodes, args.episode_len, args.seed, Path(args.out), args.force
            )
            print(f"wrote dataset to {out}")
        elif args.command == "pretrain":
            if args.print_config:
                base = load_config(Path(args.config)) if args.config else RunConfig()
                sys.stdout.write(dump_config(base))
                return EXIT_OK
            if not args.config:
                raise ConfigError("pretrain requires --config (or --print-config)")
            config = load_config(Path(args.config))
            artifacts = run_pretraining(config, stop_after=args.stop_after, resume=args.resume)
            print(
                f"completed {artifacts.completed_steps} steps; "
                f"metrics at {artifacts.metrics_csv}, checkpoint at {artifacts.checkpoint}"
            )
        elif args.command == "eval":
            config = load_config(Path(args.config))
            if not args.replay_oracle and not args.checkpoint:
                raise ConfigError("eval requires --checkpoint unless --replay-oracle is set")
            rows = run_eval(
                config,
                checkpoint=Path(args.checkpoint) if args.checkpoint else None,
                replay_oracle=args.replay_oracle,
                eval_csv=Path(args.eval_csv) if args.eval_csv else None,
            )
            for row in rows:
                print(f"{row['task']}/{row['metric']}: {row['mean']:.4f} +- {row['stderr']:.4f}")
        elif args.command == "report":
            print(report(Path(args.eval_csv)))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, ArtifactError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
