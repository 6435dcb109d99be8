"""Command line entry point: ``atsc train | eval | compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigValidationError, ScenarioConfig, load_config
from .harness import MissingCheckpointError, compare, run_eval, run_training
from .signals import ControllerKind

log = logging.getLogger("atsc")

ALL_CONTROLLERS = [k.value for k in ControllerKind]


def _config(path: Optional[str]) -> ScenarioConfig:
    return ScenarioConfig() if path is None else load_config(path)


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def _checkpoint_pair(text: str) -> tuple[str, str]:
    kind, sep, path = text.partition("=")
    if not sep or kind not in ("te", "sed"):
        raise argparse.ArgumentTypeError(f"expected te=PATH or sed=PATH, got {text!r}")
    return kind, path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atsc", description="Adaptive traffic signal control experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a D3QN agent")
    t.add_argument("--config", help="TOML scenario file (defaults when omitted)")
    t.add_argument("--out", required=True)
    t.add_argument("--controller", choices=["te", "sed"], default="sed")
    t.add_argument("--entropy-reweight", type=int, metavar="N",
                   help="recompute reward weights every N episodes (0 disables)")

    e = sub.add_parser("eval", help="evaluate one controller on held-out seeds")
    e.add_argument("--config")
    e.add_argument("--controller", choices=ALL_CONTROLLERS, required=True)
    e.add_argument("--checkpoint", help="agent checkpoint, required for te and sed")
    e.add_argument("--out", required=True)
    e.add_argument("--seeds", type=_seed_list, help="override the configured evaluation seeds")
    e.add_argument("--log-trajectories", action="store_true")
    e.add_argument("--conflict-events", action="store_true",
                   help="also report conflict onsets instead of per-step instances")

    c = sub.add_parser("compare", help="evaluate several controllers and tabulate deltas vs fixed-time")
    c.add_argument("--config")
    c.add_argument("--seeds", type=_seed_list, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--controllers", type=lambda s: s.split(","), default=ALL_CONTROLLERS)
    c.add_argument("--checkpoint", type=_checkpoint_pair, action="append", default=[],
                   metavar="KIND=PATH", help="reuse a trained agent instead of training one")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args.config)
        if args.command == "train":
            def progress(ep, res):
                log.info("episode %d reward %.3f waiting %.0f conflicts %d", ep, res.reward,
                         res.summary.waiting_s, res.summary.conflicts)

            ckpt = run_training(cfg, args.out, args.controller, args.entropy_reweight, progress)
            log.info("checkpoint written to %s", ckpt)
        elif args.command == "eval":
            run_eval(cfg, args.controller, args.out, args.checkpoint, args.seeds,
                     args.log_trajectories, args.conflict_events)
        else:
            bad = [k for k in args.controllers if k not in ALL_CONTROLLERS]
            if bad:
                raise ConfigValidationError(f"unknown controller(s): {', '.join(bad)}")
            compare(cfg, args.controllers, args.seeds, args.out, dict(args.checkpoint))
            log.info("comparison written to %s", Path(args.out) / "comparison.csv")
    except (ConfigValidationError, MissingCheckpointError, FileNotFoundError) as exc:
        print(f"atsc: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
