"""Command-line entry point: run, sweep, validate-trace, estimate-lifetime."""

import argparse
import sys

from .endurance import estimate_from_file
from .errors import SimError
from .timing import TimingParams
from .validate import validate_file


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="xamsim",
        description="Cycle-approximate simulator for a reconfigurable "
                    "RAM/CAM resistive memory stack")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="results", help="results directory")

    p_sweep = sub.add_parser("sweep", help="hashing grid sweep over a config")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", default="results")
    p_sweep.add_argument("--windows", default="32,64,128")
    p_sweep.add_argument("--sizes", default="10,11,12")

    p_val = sub.add_parser("validate-trace",
                           help="check a command trace against the timing rules")
    p_val.add_argument("trace")
    p_val.add_argument("--timing", help="key=value timing file", default=None)

    p_life = sub.add_parser("estimate-lifetime",
                            help="replay a wear-snapshot file to first cell death")
    p_life.add_argument("snapshots")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "run":
        from .harness import run_experiment
        csv_text, manifest, _ = run_experiment(args.config, args.out)
        sys.stdout.write(csv_text)
        print(f"# manifest: seed={manifest['seed']} "
              f"sha={manifest['config_sha256'][:12]}", file=sys.stderr)
        return 0

    if args.command == "sweep":
        from .harness import run_sweep
        windows = tuple(int(w) for w in args.windows.split(","))
        sizes = tuple(int(s) for s in args.sizes.split(","))
        text = run_sweep(args.config, args.out, windows, sizes)
        sys.stdout.write(text)
        return 0

    if args.command == "validate-trace":
        timing = (TimingParams.from_file(args.timing) if args.timing
                  else TimingParams())
        report = validate_file(args.trace, timing)
        print(f"{report.commands} commands, "
              f"{len(report.violations)} violations")
        for v in report.violations[:20]:
            print(f"  {v}")
        return 0 if report.ok else 1

    if args.command == "estimate-lifetime":
        rep = estimate_from_file(args.snapshots)
        print(f"lifetime_years,{rep.years:.4f}")
        print(f"lifetime_seconds,{rep.seconds:.1f}")
        print(f"ideal_years,{rep.ideal_years:.4f}")
        print(f"limiting_cell,{'/'.join(str(c) for c in rep.limiting_cell)}")
        return 0
    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
