"""Command line entry point: ``flockenergy {run,sweep,check,plot-data}``.

Exit codes: 0 success, 1 validation or I/O failure, 2 invariant-check failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .checks import run_checks
from .scenario import OUT_ENV, ConfigError, emit_plot_data, load_config, run_scenario, run_sweep


def _load(args) -> object:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicas is not None:
        changes["replicas"] = args.replicas
    cfg = dataclasses.replace(cfg, **changes)
    return cfg.validate()


def _out(args, cfg=None) -> str:
    return args.out or (cfg.out if cfg is not None else "") or os.environ.get(OUT_ENV, "out")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="flockenergy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--replicas", type=int)
    p = sub.add_parser("check")
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("plot-data")
    p.add_argument("run_dir")
    p.add_argument("--out")
    args = parser.parse_args(argv)

    try:
        if args.command == "check":
            results = run_checks(args.seed)
            for name, ok in results.items():
                print(f"{'PASS' if ok else 'FAIL'} {name}")
            return 0 if all(results.values()) else 2
        if args.command == "plot-data":
            for path in emit_plot_data(args.run_dir, args.out):
                print(path)
            return 0
        cfg = _load(args)
        if args.command == "run":
            summary = run_scenario(cfg, _out(args, cfg))
            for k, v in summary.items():
                print(f"{k} = {v}")
        else:
            print(run_sweep(cfg, _out(args, cfg)))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
