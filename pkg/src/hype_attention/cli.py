"""Command-line entry point: ``hype-attn {verify,bias-dump,bench}``.

Exit codes: 0 success, 1 failed check or overflow, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import BenchFailure, run_bench
from .config import ConfigError, load_config
from .encoding import HypeHeadParams, build_bias_hype
from .report import bias_to_json, matrix_to_csv, record_to_csv
from .suites import run_suites
from .tensor import NonFiniteError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write(text: str, path):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _overrides(args):
    return {"seed": args.seed, "width": args.width}


def cmd_verify(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    report = run_suites(cfg, parallel=args.parallel)
    for line in report["lines"]:
        print(line)
    if args.out:
        _write(json.dumps(report, indent=2) + "\n", args.out)
    if report["passed"]:
        print("verify: all checks passed")
        return EXIT_OK
    print(f"verify: first failure -> {report['first_failure']}", file=sys.stderr)
    return EXIT_FAIL


def cmd_bias_dump(args) -> int:
    if args.config:
        cfg = load_config(args.config, **_overrides(args))
        L, params = cfg.L, cfg.head_params[0]
        width = cfg.width
    else:
        if args.L is None or args.mu is None:
            raise ConfigError("bias-dump needs --L and --mu (or --config)")
        L, params, width = args.L, HypeHeadParams(args.mu, args.tau), args.width or "f64"
    bias = build_bias_hype(L, params, width=width)
    text = matrix_to_csv(bias.values) if args.format == "csv" else bias_to_json(bias) + "\n"
    _write(text, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    try:
        report = run_bench(cfg)
        status = EXIT_OK
    except BenchFailure as exc:
        report, status = exc.report, EXIT_FAIL
        print(f"bench: {exc}", file=sys.stderr)
    record = report.to_dict()
    text = record_to_csv(record) if args.format == "csv" else json.dumps(record, indent=2) + "\n"
    _write(text, args.out)
    if args.out:
        ratio = report.stored_pe_values_explicit / report.stored_pe_values_hype
        print(f"stored positional values: concat {report.stored_pe_values_hype}, "
              f"explicit {report.stored_pe_values_explicit} (x{ratio:.1f}); "
              f"median time concat {report.wall_time_concat:.4f}s, "
              f"explicit {report.wall_time_explicit:.4f}s")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hype-attn", description="Hyperbolic positional encoding checks and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--width", choices=("f32", "f64"))

    p = sub.add_parser("verify", parents=[common], help="run the verification suites")
    p.add_argument("--parallel", action="store_true", help="run suites concurrently")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bias-dump", parents=[common], help="write the explicit bias matrix")
    p.add_argument("--L", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_bias_dump)

    p = sub.add_parser("bench", parents=[common], help="storage and timing benchmark")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
