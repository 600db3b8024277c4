"""Command line entry point: ``windipp <command> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

COMMANDS = ("run", "place", "costs", "route", "simulate", "truth-export")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config (default: bundled scenario)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, metavar="N", help="override every seed in the config")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker threads inside each stage (1 = sequential)")
    common.add_argument("--desk-scale", action="store_true",
                        help="shrink the scenario to the 2 km desk preset")
    parser = argparse.ArgumentParser(prog="windipp",
                                     description="Wind-aware multi-UAV informative path planning.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    run = sub.add_parser("run", parents=[common], help="all stages end to end")
    run.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    sub.add_parser("place", parents=[common], help="task placement -> placement.csv")
    sub.add_parser("costs", parents=[common], help="FMT* cost matrix -> costs.csv, paths.json")
    sub.add_parser("route", parents=[common], help="GA routing -> routes.json")
    sub.add_parser("simulate", parents=[common], help="mission and belief map")
    sub.add_parser("truth-export", parents=[common], help="ground truth on the test grid -> truth.csv")
    return parser


def _context(args) -> pipeline.Context:
    cfg = load_config(args.config, desk=args.desk_scale, seed=args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return pipeline.Context(cfg, out, args.threads)


def cmd_run(args) -> int:
    ctx = _context(args)
    summary = pipeline.run_all(ctx)
    if getattr(args, "figures", False):
        from .report import render_figures
        render_figures(ctx.out)
    mission = summary["mission"]
    print(f"placement objective {summary['placement']['objective_nats']:.4f} nats, "
          f"C_max {summary['routing']['c_max']:.2f} s, "
          f"final RMSE {mission['final_rmse_dbm']:.3f} dBm, "
          f"final mean std {mission['final_mean_std_dbm']:.3f} dBm")
    return EXIT_OK


def cmd_stage(args) -> int:
    ctx = _context(args)
    if args.command == "truth-export":
        pipeline.export_truth(ctx)
    else:
        pipeline.STAGE_RUNNERS[args.command](ctx)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_run(args) if args.command == "run" else cmd_stage(args)
    except ConfigError as exc:
        print(f"windipp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pipeline.StageError as exc:
        print(f"windipp: stage failed: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
