"""Recovery rate of a hidden stoquastic basis for d = 2, 3, 4 (one output directory per d)."""

import sys
from pathlib import Path

from stoqease.cli import main

if __name__ == "__main__":
    import json

    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/benchmark")
    code = 0
    for d in (2, 3, 4):
        sub = out / f"d{d}"
        sub.mkdir(parents=True, exist_ok=True)
        cfg = {"n_instances": 100, "local_dim": d, "optimizer": {"max_iters": 1000}}
        (sub / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
        code = max(code, main(["benchmark-random", "--config", str(sub / "config.json"), "--out", str(sub)]))
    sys.exit(code)
