"""Command line entry point.

    l1control {solve,convergence,l1-schemes,mesh-independence,sparsity-threshold}
              --config PATH [--out DIR] [--seed N]

Exit status: 0 success, 1 a study check failed, 2 configuration error,
3 solver non-convergence, 4 internal assertion or unexpected error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import studies
from .config import ConfigError, ExperimentConfig, load_config
from .errors import BreakdownError, ConvergenceError, DimensionError, L1ControlError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NONCONV, EXIT_INTERNAL = 0, 1, 2, 3, 4

log = logging.getLogger("l1control")


def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    res, sol, hist = studies.run_solve(cfg, out)
    s = sol.summary()
    print(f"m = {cfg.problem.m}  iterations = {res.iterations}  converged = {res.converged}")
    print(f"J = {s['J']:.10g}  Phi = {s['Phi']:.10g}  gap = {s['gap']:.3e}  kkt = {s['kkt']:.3e}")
    print(f"wrote {out}")
    return EXIT_OK if res.converged else EXIT_NONCONV


def _study(fn, filename):
    def run(cfg: ExperimentConfig, out: Path) -> int:
        result = fn(cfg)
        path = studies.write_csv(result, out / filename)
        print(studies.format_table(result))
        for k, v in result.meta.items():
            if k.startswith(("fitted", "slope", "iteration_ratio", "beta0", "lam_")):
                print(f"{k} = {v}")
        for k, v in result.checks.items():
            print(f"{'PASS' if v else 'FAIL'} {k}")
        print(f"wrote {path}")
        if not result.converged:
            return EXIT_NONCONV
        return EXIT_OK if result.passed else EXIT_CHECK
    return run


COMMANDS = {
    "solve": cmd_solve,
    "convergence": _study(studies.convergence_study, "convergence.csv"),
    "l1-schemes": _study(studies.l1_schemes_study, "l1_schemes.csv"),
    "mesh-independence": _study(studies.mesh_independence_study, "mesh_independence.csv"),
    "sparsity-threshold": _study(studies.sparsity_threshold_study, "sparsity_threshold.csv"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="l1control",
                                 description="Sparse elliptic optimal control via the discretised dual.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="experiment config file")
    ap.add_argument("--out", default=None, help="output directory (default: study.out)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out if args.out is not None else cfg.study.out)
    try:
        return COMMANDS[args.command](cfg, out)
    except (ConvergenceError, BreakdownError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except DimensionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, ZeroDivisionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssertionError, L1ControlError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
