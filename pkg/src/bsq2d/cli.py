"""Command line: ``bsq2d {simulate,lifespan,estimates,convergence,check}``.

Environment overrides: ``BSQ2D_OUT`` (output directory), ``BSQ2D_SEED``
(seed) and ``BSQ2D_JOBS`` (worker count).  Command-line flags take
precedence.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import harness
from .config import ConfigError, ConvergenceSpec, EstimatesSpec, LifespanSpec, load_config

__all__ = ["main", "build_parser"]

_KINDS = {"lifespan": LifespanSpec, "estimates": EstimatesSpec, "convergence": ConvergenceSpec}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bsq2d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "integrate one configuration and write diagnostics and snapshots"),
        ("lifespan", "doubling-time sweep over epsilon"),
        ("estimates", "dispersive-estimate scenarios"),
        ("convergence", "temporal and spatial convergence study"),
        ("check", "fast invariant suite"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="TOML configuration file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
        s.add_argument("--jobs", type=int, help="worker processes")
    return p


def _print_report(rep) -> None:
    verdict = {True: "PASS", False: "FAIL", None: "INCONCLUSIVE"}[rep.passed]
    fitted = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in rep.fitted.items())
    print(f"{verdict} {rep.name}: {fitted}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        jobs = harness.resolve_jobs(args.jobs)
        want = _KINDS.get(args.command)
        if want is not None and not isinstance(cfg.experiment, want):
            raise ConfigError(f"'{args.command}' needs [experiment] kind = \"{args.command}\"")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    out = harness.resolve_out(args.out)
    try:
        if args.command == "simulate":
            res = harness.run_simulate(cfg, out)
            print(f"{res.message}; wrote {len(res.paths)} files to {out}")
            return res.status
        if args.command == "check":
            res = harness.run_check(cfg, out)
            print(res.message)
            return res.status
        if args.command == "lifespan":
            reports = [harness.run_lifespan_scan(cfg, out, jobs)]
        elif args.command == "convergence":
            reports = list(harness.run_convergence(cfg, out))
        else:
            reports = harness.run_estimates(cfg, out, jobs)
        for rep in reports:
            _print_report(rep)
        return harness.EXIT_OK if all(r.passed is not False for r in reports) else harness.EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return harness.EXIT_IO
    except harness.BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return harness.EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
