"""Command-line entry point: besim run | check | report."""

from __future__ import annotations

import os

# BESIM_THREADS caps worker pools in the numerics backends; it must be
# exported before numpy initializes its threading.
_threads = os.environ.get("BESIM_THREADS")
if _threads:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, _threads)

import argparse
import json
import sys

from .config import load_config
from .errors import BesimError, ConfigurationError
from .runner import reemit_summary, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiment described by a config file")
    p_run.add_argument("config", help="path to the sectioned key=value config")
    p_run.add_argument("--out", default=None, help="output directory (overrides [io] out)")
    p_run.add_argument("--seed", type=int, default=None, help="override the run seed")
    p_run.add_argument("--resume", default=None, help="checkpoint to resume from")

    p_check = sub.add_parser("check", help="validate a config file and exit")
    p_check.add_argument("config")

    p_report = sub.add_parser("report", help="re-emit summary.json from an output directory")
    p_report.add_argument("out_dir")
    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "check":
            load_config(args.config)
            print("ok")
            return 0
        if args.command == "report":
            summary = reemit_summary(args.out_dir)
            print(json.dumps(summary, indent=2, sort_keys=True))
            return 0
        config = load_config(args.config)
        return run(config, out=args.out, seed=args.seed, resume=args.resume)
    except ConfigurationError as exc:
        return _fail(exc, 2)
    except BesimError as exc:
        return _fail(exc, 3)
    except OSError as exc:
        return _fail(exc, 3)


if __name__ == "__main__":
    sys.exit(main())
