"""Command-line entry point: ``kgt run|sweep|validate|rate-bound|partition``."""

from __future__ import annotations

import argparse
import csv
import sys

from . import theory
from .algorithms import ConfigError
from .metrics import format_float
from .problems import partition_labels
from .runner import RunConfig, SweepConfig, execute, execute_sweep, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


def _load(path, want):
    cfg = parse_config(path)
    if want is RunConfig and isinstance(cfg, SweepConfig):
        raise ConfigError(f"{path} is a sweep config; use `kgt sweep`")
    if want is SweepConfig and isinstance(cfg, RunConfig):
        raise ConfigError(f"{path} has no [sweep] section; use `kgt run`")
    return cfg


def cmd_run(args):
    cfg = _load(args.config, RunConfig)
    summary = execute(cfg, args.out)
    print(f"{cfg.variant}: status={summary.status} "
          f"final grad_norm_sq={format_float(summary.final('grad_norm_sq'))} "
          f"final f_gap={format_float(summary.final('f_gap'))}")
    return EXIT_DIVERGED if summary.status == "diverged" else EXIT_OK


def cmd_sweep(args):
    sweep = _load(args.config, SweepConfig)
    summaries = execute_sweep(sweep, args.out)
    bad = sum(s.status != "ok" for s in summaries)
    print(f"{len(summaries)} grid points, {bad} diverged")
    return EXIT_OK


def cmd_validate(args):
    cfg = parse_config(args.config)
    if isinstance(cfg, SweepConfig):
        print(f"ok: sweep over {', '.join(cfg.axes)} with {cfg.size} grid points")
    else:
        print(f"ok: run variant={cfg.variant} K={cfg.K} T={cfg.T} topology={cfg.topology}")
    return EXIT_OK


def cmd_rate_bound(args):
    try:
        inp = theory.RateInputs(args.sigma, args.n, args.K, args.p, args.eps, args.L, args.F0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rates = theory.all_rates(inp, args.zeta_bar)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(list(rates))
    w.writerow([format_float(v) for v in rates.values()])
    return EXIT_OK


def cmd_partition(args):
    labels = []
    with open(args.labels, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                labels.append(int(row[0]))
            except ValueError:
                if i == 0:
                    continue  # header
                raise ConfigError(f"{args.labels}: bad label {row[0]!r} on line {i + 1}")
    try:
        parts = partition_labels(labels, args.n, args.mode, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node", "index"))
        for node, idx in enumerate(parts):
            for j in idx:
                w.writerow((node, int(j)))
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="kgt", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one config (all repetitions)")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every point of a sweep config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="parse and check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rate-bound", help="print predicted communication rounds per method")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--F0", type=float, default=1.0)
    p.add_argument("--zeta-bar", type=float, default=0.0, help="heterogeneity, D-SGD only")
    p.set_defaults(func=cmd_rate_bound)

    p = sub.add_parser("partition", help="split a label CSV across nodes")
    p.add_argument("labels", help="CSV whose first column is the class id")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=("random", "sorted"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write here instead of stdout")
    p.set_defaults(func=cmd_partition)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
