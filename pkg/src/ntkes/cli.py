"""The `ntkes` command line: run one experiment from a JSON config.

Thread-count control must happen before numpy is first imported (BLAS reads
its environment variables at load time), so this module keeps its imports
light and pulls in the numerical stack only after --threads is applied.
"""

import argparse
import dataclasses
import os
import sys

from .errors import ConfigError, DatasetError, NumericalError

_COMMANDS = {
    "simulate": "simulate",
    "rate-sweep": "rate_sweep",
    "edr": "edr",
    "tracking": "tracking",
}

_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ntkes",
        description="Over-parameterized two-layer ReLU network training with "
        "kernel-complexity early stopping: simulation, rate, spectrum and "
        "tracking experiments driven by a JSON config.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="{%s}" % ",".join(_COMMANDS))
    help_lines = {
        "simulate": "train networks across n, record test-risk curves and stopping steps",
        "rate-sweep": "fixed-point and stopping-time scaling across n",
        "edr": "kernel eigenvalue decay slopes across n",
        "tracking": "network-vs-kernel-flow gap across a width ladder",
    }
    for name in _COMMANDS:
        sub = subparsers.add_parser(name, help=help_lines[name])
        sub.add_argument("--config", required=True, help="path to the JSON config (or inline JSON)")
        sub.add_argument("--out", default=None, help="output directory (overrides the config)")
        sub.add_argument("--overwrite", action="store_true", help="replace existing report files")
        sub.add_argument(
            "--paper-scale",
            action="store_true",
            help="rewrite the config to the full-scale protocol (d=50, n up to 1000; hours of compute)",
        )
        sub.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count (default: NTKES_THREADS or library default)")
        sub.add_argument("--seed", type=int, default=None, help="seed override (takes precedence over the config)")
    return parser


def _configure_threads(threads):
    if threads is None:
        raw = os.environ.get("NTKES_THREADS")
        if raw is None or raw == "":
            return
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"NTKES_THREADS must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def resolve_config(args):
    """Parsed config with all CLI overrides applied (no experiment run yet)."""
    from . import experiments

    cfg = experiments.parse_config(args.config, experiment=_COMMANDS[args.command])
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must fit in 64 unsigned bits, got {args.seed}")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        if not args.out:
            raise ConfigError("--out must be a nonempty path")
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    if args.paper_scale:
        cfg = experiments.apply_paper_scale(cfg)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _configure_threads(args.threads)
        cfg = resolve_config(args)
        from . import experiments

        report = experiments.run_experiment(cfg)
        paths = experiments.write_report(report, cfg.output_dir, overwrite=args.overwrite)
        for path in paths:
            print(path)
        return 0
    except (ConfigError, DatasetError) as exc:
        print(f"ntkes: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"ntkes: numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"ntkes: i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
