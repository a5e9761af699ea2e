"""Shared launcher: write a JSON config next to the outputs and hand it to the CLI."""

import argparse
import json
from pathlib import Path

from stoqease.cli import main


def launch(subcommand: str, config: dict, description: str, default_out: str) -> int:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--out", type=Path, default=Path(default_out))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--grid", action="append", default=[])
    parser.add_argument("extra", nargs="*", help="further CLI arguments, passed through")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    cfg_path = args.out / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    argv = [subcommand, "--config", str(cfg_path), "--out", str(args.out), "--seed", str(args.seed)]
    if args.threads is not None:
        argv += ["--threads", str(args.threads)]
    for g in args.grid:
        argv += ["--grid", g]
    return main(argv + args.extra)
