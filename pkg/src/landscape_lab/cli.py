"""``landscape-lab`` command line.

Exit codes: 0 when every configured check passes, 1 when a check fails,
2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, load_config, parse_generator
from .experiments import emit_plots_data, run_experiment
from .generators import generate
from .serialization import dumps_instance

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landscape-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="override output_dir")
        p.add_argument("--plots", action="store_true", help="also write plot-ready CSVs")
    g = sub.add_parser("generate", help="write a generated instance as JSON")
    g.add_argument("--config", required=True, help="JSON generator spec (family, d, family_params, seed)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    return parser


def _generate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}", f"malformed JSON ({exc.msg})") from exc
    if args.seed is not None:
        doc = {**doc, "seed": args.seed}
    spec = parse_generator(doc, master_seed=0, path="spec")
    try:
        text = dumps_instance(generate(spec))
    except ValueError as exc:
        raise ConfigError("spec", str(exc)) from exc
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "generate":
            return _generate(args)
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out,
                          experiment_override=args.command)
    except (ConfigError, OSError) as exc:
        print(f"landscape-lab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run_experiment(cfg)
    except ValueError as exc:
        print(f"landscape-lab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.plots:
        emit_plots_data(report, cfg.output_dir)
    for check in report.summary["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']}")
    if not report.passed:
        print(f"landscape-lab: failed checks: {', '.join(report.failed_checks())}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
