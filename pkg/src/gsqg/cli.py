"""Command line entry point: ``gsqg run|validate|report``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigError
from .experiments import load_config, read_report, run, validate

log = logging.getLogger("gsqg")


def _set_threads(threads: int, deterministic: bool) -> None:
    # compiled loops are serial; only touch the numba pool when asked for more threads
    if deterministic or threads <= 1:
        return
    import numba

    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    _set_threads(args.threads, args.deterministic)
    out = args.out or config.output_dir or os.path.join("runs", f"{config.scenario}-{config.config_hash[:12]}")
    log.info("running %s (config %s)", config.scenario, config.config_hash[:12])
    report = run(config, exploratory=args.exploratory)
    path = report.write(out)
    _print_verdicts(report.scenario, report.verdicts, report.wall_clock)
    print(f"report: {path}")
    return 0 if report.passed else 1


def cmd_validate(args) -> int:
    config = load_config(args.config)
    params = validate(config, exploratory=args.exploratory)
    print(f"{args.config}: ok ({config.scenario}, {len(params)} parameters, hash {config.config_hash[:12]})")
    return 0


def cmd_report(args) -> int:
    data = read_report(args.dir)
    _print_verdicts(data["scenario"], data["verdicts"], data.get("wall_clock_s", 0.0))
    for name, metrics in data["metrics"].items():
        print(f"  {name}: {metrics}")
    return 0 if data["passed"] else 1


def _print_verdicts(scenario, verdicts, wall) -> None:
    print(f"{scenario}: {sum(verdicts.values())}/{len(verdicts)} clauses passed in {wall:.1f}s")
    for clause, ok in verdicts.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {clause}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsqg", description="gSQG point-vortex and vortex-blob experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--deterministic", action="store_true", help="single-threaded, bit-reproducible outputs")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--exploratory", action="store_true", help="allow m <= sqrt(3) in blob scenarios")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    p_val.add_argument("--exploratory", action="store_true")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("report", help="summarize a run directory")
    p_rep.add_argument("dir")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
