"""Command line entry point for running simulations and presets."""
from __future__ import annotations

import argparse
import sys

from .baselines import SCHEMES
from .config import ConfigError, SimConfig, load_config
from .harness import HELPER_KINDS, PRESETS, Experiment, build_preset, run_experiment
from .metrics import METRIC_FIELDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo simulator of a smart-helper-aided fog RAN "
                    "with learned edge caching.")
    parser.add_argument("--config", help="YAML config file (SimConfig keys)")
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="run a named experiment preset")
    parser.add_argument("--seed", type=int, help="master seed (overrides rng_seed)")
    parser.add_argument("--runs", type=int, help="Monte Carlo runs per sweep point")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--scheme", choices=SCHEMES, default="learned",
                        help="caching scheme for a single-point run")
    parser.add_argument("--helper", choices=HELPER_KINDS, default="sh",
                        help="helper kind for a single-point run")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: all cores)")
    parser.add_argument("--trace", action="store_true",
                        help="write per-slot delivery and cache trace CSVs "
                             "for the first run of each point")
    parser.add_argument("--no-plots", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = load_config(args.config) if args.config else SimConfig()
        if args.seed is not None:
            base = base.replace(rng_seed=args.seed)
        base.require_valid()
        if args.preset:
            exp = build_preset(args.preset, base, runs=args.runs,
                               master_seed=base.rng_seed)
        else:
            exp = Experiment(name="single", base=base,
                             points=[{"scheme": args.scheme, "helper": args.helper}],
                             runs_per_point=args.runs or 20,
                             master_seed=base.rng_seed,
                             collect_traces=args.scheme == "learned")
        outcome = run_experiment(exp, args.out, jobs=args.jobs,
                                 plots=not args.no_plots,
                                 collect_deliveries=args.trace)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"{exp.name}: {len(exp.points)} point(s) x {exp.runs_per_point} run(s) "
          f"-> {outcome['out']}")
    header = f"{'point':>5} {'scheme':>8} {'helper':>8} {'H':>3} {'gamma':>6}"
    header += "".join(f" {name:>16}" for name in METRIC_FIELDS)
    print(header)
    for row in outcome["rows"]:
        line = (f"{row['point']:>5} {row['scheme']:>8} {row['helper']:>8} "
                f"{row['num_sh']:>3} {row['zipf_gamma']:>6}")
        line += "".join(f" {row[f'{name}_mean']:>16.6g}" for name in METRIC_FIELDS)
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
