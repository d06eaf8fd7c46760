"""Command-line entry point: ``iasim {run,validate,topology,selftest}``.

Exit status is 0 on success, 1 for configuration problems and 2 for runtime
or numerical failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .errors import ConfigError
from .harness.config import SimConfig, load_config, parse_value
from .harness.io import export_topology, write_csv, write_plot_stub, write_validation_csv
from .harness.selftest import run_selftest
from .harness.sweep import build_placement, run_sweep
from .harness.validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", "--master-seed", dest="master_seed", metavar="U64", help="master seed")
    p.add_argument("--out", metavar="PATH", help="output file")
    grp = p.add_argument_group("configuration overrides")
    for f in fields(SimConfig):
        if f.name == "master_seed":
            continue
        grp.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar="VALUE", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="iasim", description="Interference-alignment sum-rate simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", parents=[common], help="closed-form power sweep")
    run.add_argument("--plot-stub", metavar="PATH", help="also write a matplotlib script for the CSV")
    val = sub.add_parser("validate", parents=[common], help="closed form vs matrix-level simulation")
    val.add_argument("--perfect-csi", action="store_true", help="force zero estimation error")
    topo = sub.add_parser("topology", parents=[common], help="export one node placement")
    topo.add_argument("--realization", type=int, default=0, metavar="INDEX")
    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def _config(args) -> SimConfig:
    overrides = {}
    for f in fields(SimConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            overrides[f.name] = parse_value(f.name, raw)
    return load_config(args.config, overrides)


def _need_out(args) -> str:
    if not args.out:
        raise ConfigError(f"{args.command} needs --out PATH")
    return args.out


def _run(args, out) -> int:
    if args.command == "selftest":
        return EXIT_OK if run_selftest(lambda s: print(s, file=out)) else EXIT_RUNTIME
    cfg = _config(args)
    path = _need_out(args)
    if args.command == "run":
        write_csv(run_sweep(cfg), path)
        if args.plot_stub:
            write_plot_stub(args.plot_stub)
    elif args.command == "validate":
        res = run_validation(cfg, perfect_csi=True if args.perfect_csi else None)
        write_validation_csv(res, path)
        print(f"{'p_t_dbm':>8} {'analytic':>12} {'simulated':>12} {'gap':>9} {'nonconv':>7}", file=out)
        for r in res.rows:
            print(f"{r.p_t_dbm:8.2f} {r.analytic:12.4f} {r.simulated:12.4f} {r.gap:+9.4%} {r.nonconverged:7d}", file=out)
    else:
        index = cfg.realization_offset + args.realization
        export_topology(build_placement(cfg, index), path)
    return EXIT_OK


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return _run(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
