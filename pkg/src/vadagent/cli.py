"""Command-line entry point.

    vadagent run --config engine.ini --manifest videos.json --out results/
    vadagent validate --config engine.ini

Exit codes: 0 success, 1 one or more videos failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import parameter_table, read_config
from .pipeline import read_manifest, run_dataset
from .prompts import PROFILE_IDS

EXIT_OK, EXIT_VIDEO_FAILURES, EXIT_CONFIG = 0, 1, 2


def _overrides(args) -> dict[str, str]:
    out = {}
    if getattr(args, "workers", None) is not None:
        out["engine.workers"] = str(args.workers)
    if getattr(args, "profile", None):
        out["engine.profile"] = args.profile
    if getattr(args, "out", None):
        out["engine.output"] = args.out
    if getattr(args, "backend", None):
        out["backend.vlm.kind"] = args.backend
        out["backend.llm.kind"] = args.backend
    return out


def cmd_validate(args) -> int:
    cfg, problems = read_config(args.config)
    width = max(len(k) for k, _ in parameter_table(cfg))
    for key, value in parameter_table(cfg):
        print(f"{key:<{width}}  {value}")
    print()
    if problems:
        print(f"invalid: {len(problems)} violation(s)")
        for p in problems:
            print(f"  - {p}")
        return EXIT_CONFIG
    print("valid, 0 violations")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, problems = read_config(args.config, _overrides(args))
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        specs = read_manifest(args.manifest)
    except (OSError, ValueError, KeyError) as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outcomes = run_dataset(cfg, specs, cfg.output)
    failed = [o for o in outcomes if not o.ok]
    print(f"{len(outcomes) - len(failed)}/{len(outcomes)} videos scored; results in {cfg.output}")
    for o in failed:
        print(f"  FAILED {o.video_id}: {o.error}", file=sys.stderr)
    return EXIT_VIDEO_FAILURES if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vadagent", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="score every video in a manifest")
    run.add_argument("--config", required=True)
    run.add_argument("--manifest", required=True)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.add_argument("--profile", choices=PROFILE_IDS)
    run.add_argument("--backend", choices=("scripted", "http"))
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config and print effective parameters")
    val.add_argument("--config", required=True)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
