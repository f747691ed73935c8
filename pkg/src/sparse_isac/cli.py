"""Command-line entry point: ``sparse-isac run ...`` and ``sparse-isac validate ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .beamforming import StopRule
from .config import ConfigError, load_config, profile_config
from .harness import STRATEGIES, SWEEP_AXES, ExperimentPlan, run_sweep

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_USAGE = 2
EXIT_ROW_FAILURES = 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from exc


def _strategy_list(text: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [n for n in names if n not in STRATEGIES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown strategies {bad}; choose from {', '.join(STRATEGIES)}")
    return names


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-isac", description="Seeded ISAC beamforming and sensing sweeps with CSV output.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded parameter sweep and write CSV + manifest")
    run.add_argument("--config", type=Path, help="YAML config file (unit-suffixed keys)")
    run.add_argument("--profile", choices=("desk", "reference"), default="desk",
                     help="base profile the config file overrides (default: desk)")
    run.add_argument("--sweep", choices=SWEEP_AXES, required=True, help="parameter to sweep")
    run.add_argument("--values", type=_float_list, required=True, help="comma-separated sweep values")
    run.add_argument("--trials", type=int, default=20, help="Monte-Carlo trials per point")
    run.add_argument("--strategies", type=_strategy_list, default=STRATEGIES,
                     help=f"comma-separated subset of {','.join(STRATEGIES)}")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--seed", type=_seed, default=0, help="master seed (unsigned 64-bit)")
    run.add_argument("--max-iter", type=int, default=500, help="solver iteration cap")
    run.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    run.add_argument("--allow-nonconverged", action="store_true",
                     help="exit 0 even if some solves hit the iteration cap")

    val = sub.add_parser("validate", help="check a config file against every invariant")
    val.add_argument("--config", type=Path, required=True)
    val.add_argument("--profile", choices=("desk", "reference"), default="desk")
    return parser


def _load(args):
    base = profile_config(args.profile)
    return load_config(args.config, base) if args.config else base


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "validate":
        print(f"ok: config hash {cfg.digest()}")
        return EXIT_OK

    try:
        plan = ExperimentPlan(
            base=cfg, axis=args.sweep, values=args.values, trials=args.trials,
            strategies=args.strategies, out=args.out, master_seed=args.seed,
            stop=StopRule(max_iter=args.max_iter), workers=args.workers,
        )
    except (ValueError, ConfigError) as exc:
        print(f"invalid plan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_sweep(plan)
    for m in result.means:
        print(f"{m.strategy:16s} {plan.axis}={m.value:g}  sum_rate={m.sum_rate_bits:.4f} bits"
              + ("" if m.rmse_d_m is None else
                 f"  rmse(theta,d,v)=({m.rmse_theta_rad:.4g}, {m.rmse_d_m:.4g}, {m.rmse_v_mps:.4g})"))
    print(f"wrote {result.csv_path}")
    if result.failures:
        print(f"{len(result.failures)} trial(s) failed; see the status column", file=sys.stderr)
        return EXIT_ROW_FAILURES
    if not result.all_converged and not args.allow_nonconverged:
        print("some solves did not converge (use --allow-nonconverged to accept)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
