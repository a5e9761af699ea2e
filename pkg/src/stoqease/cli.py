"""``stoqease`` command line.

Every subcommand resolves a JSON config (optional) plus flag overrides into an
``ExperimentConfig``, runs it, and writes a CSV table and a JSON manifest to
``--out``. Exit codes: 0 success, 1 invalid config, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .experiments import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    AxisSpec,
    ConfigError,
    config_from_dict,
    emit_plotdata,
    resolve_threads,
    run,
    write_outputs,
)

log = logging.getLogger("stoqease")

SUBCOMMANDS = {
    "measure": "measure",
    "avgsign": "avgsign",
    "optimize": "optimize",
    "sweep": "ladder_sweep",
    "sign-study": "sign_study",
    "embed-maxcut": "embed_maxcut",
    "verify-reduction": "maxcut_verify",
    "benchmark-random": "benchmark_random",
}
HELP = {
    "measure": "non-stoquasticity of a matrix file or model",
    "avgsign": "exact average sign of a matrix file or model",
    "optimize": "optimise the on-site basis of a translation-invariant chain",
    "sweep": "phase-diagram sweep of the ladder or J-model",
    "sign-study": "average sign against nu_1 along H_alpha for random chains",
    "embed-maxcut": "print the Hamiltonian a MaxCut instance maps to",
    "verify-reduction": "brute-force checks of the MaxCut reduction",
    "benchmark-random": "recovery rate on terms with a hidden stoquastic basis",
}
PLOT_OBSERVABLES = ("nu1_ratio", "log_sign_ratio")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stoqease", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("input", nargs="?", help="matrix, term or edge-list file")
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--threads", type=int, help="worker threads (default: $STOQEASE_THREADS or 1)")
        p.add_argument("--grid", action="append", default=[], metavar="AXIS=MIN:MAX:STEPS")
        if name == "sweep":
            p.add_argument("--model", choices=("ladder", "jmodel"), help="sweep model")
    return parser


def resolve_config(args) -> dict:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    experiment = SUBCOMMANDS[args.command]
    if args.command == "sweep":
        model = getattr(args, "model", None)
        if model is None:
            experiment = data.get("experiment", experiment)
        else:
            experiment = "jmodel_sweep" if model == "jmodel" else "ladder_sweep"
        if experiment not in ("ladder_sweep", "jmodel_sweep"):
            raise ConfigError(f"sweep cannot run experiment {experiment!r}")
    elif data.get("experiment", experiment) != experiment:
        raise ConfigError(f"config is for {data['experiment']!r}, not {args.command!r}")
    data["experiment"] = experiment
    if args.seed is not None:
        data["seed"] = args.seed
    if args.input:
        data["input_path"] = args.input
    if args.out is not None:
        data["out_dir"] = str(args.out)
    data["threads"] = resolve_threads(args.threads if args.threads is not None else data.get("threads"))
    if args.grid:
        overrides = {a.name: a for a in map(AxisSpec.parse, args.grid)}
        cfg0 = config_from_dict(dict(data, grid=data.get("grid", [])))
        axes = [overrides.pop(a.name, a) for a in cfg0.axes()]
        if overrides:
            raise ConfigError(f"unknown grid axes {sorted(overrides)}")
        data["grid"] = [dataclasses.asdict(a) for a in axes]
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = config_from_dict(resolve_config(args))
        result = run(cfg)
    except ValueError as exc:  # ConfigError and invalid model parameters
        print(f"stoqease: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"stoqease: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = Path(cfg.out_dir)
    write_outputs(result, out)
    code = result.exit_code
    for f in result.failures:
        print(f"stoqease: point {f['item']} failed: {f['error']}", file=sys.stderr)
    if cfg.experiment in ("ladder_sweep", "jmodel_sweep"):
        _, plot_code = emit_plotdata(result.rows, cfg.axes(), out / "plotdata", PLOT_OBSERVABLES)
        code = max(code, plot_code)
    if result.summary:
        print(json.dumps(result.summary, sort_keys=True, default=str))
    log.info("wrote %d rows to %s", len(result.rows), out)
    return code


if __name__ == "__main__":
    sys.exit(main())
