"""``colldeco <mode> --scenario FILE --out DIR [--threads N] [--seed S] [--tol X]``"""

from __future__ import annotations

import argparse
import json
import os
import sys

from colldeco.errors import ColldecoError, InputError
from colldeco.runner.scenario import MODES, parse_scenario

THREADS_ENV = "COLLDECO_THREADS"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colldeco", description="Collisional decoherence master equations.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--scenario", required=True, help="TOML scenario file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None, help=f"worker bound (also ${THREADS_ENV})")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="override quadrature rel_tol")
    return p


def main(argv=None) -> int:
    from colldeco.runner.modes import run, write_json

    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario, args.mode)
        if args.tol is not None and not 0 < args.tol <= 1e-2:
            raise InputError("VALIDATION_ERROR", "--tol must lie in (0, 1e-2]", field="tol")
    except ColldecoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        try:
            os.makedirs(args.out, exist_ok=True)
            write_json(args.out, "error.json", {**exc.to_dict(), "exit_status": exc.exit_status})
        except (OSError, ColldecoError):
            pass
        return exc.exit_status
    for w in sc.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.seed is not None:
        sc.seed = args.seed
    env_threads = os.environ.get(THREADS_ENV)
    if args.threads is not None:
        sc.threads = args.threads
    elif env_threads:
        try:
            sc.threads = int(env_threads)
        except ValueError:
            print(f"warning: ignoring non-integer {THREADS_ENV}={env_threads!r}", file=sys.stderr)
    status = run(sc, args.out, tol=args.tol)
    if status != 0:
        try:
            with open(os.path.join(args.out, "error.json")) as fh:
                print(f"error: {json.load(fh).get('message')}", file=sys.stderr)
        except (OSError, ValueError):
            pass
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
