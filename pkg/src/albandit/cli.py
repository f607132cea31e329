"""Command-line entry point: ``albandit run | t0 | cluster | plot``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path


from .confidence import theoretical_t0
from .corpus import CorpusParseError, CorpusSchemaError, ingest_csv, kmeans_cluster, write_arms
from .envs import keyed_generator
from .harness import ConfigError, ExperimentConfig, aggregate, run_experiment, write_traces
from .plotting import plot_file
from .policies import feature_scale

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UserError(Exception):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_experiment(cfg, threads=args.threads)
    paths = write_traces(result, args.out)
    plot_file(paths["regret"], Path(args.out) / "regret.svg", "regret")
    plot_file(paths["snapshots"], Path(args.out) / "snapshots.svg", "snapshot")
    for name, traces in result.by_algorithm().items():
        mean, std = aggregate(traces)
        _err(f"{name}: final regret {mean[-1]:.4g} +/- {std[-1]:.4g} over {len(traces)} trials")
    return EXIT_OK


def t0_value(d: int, delta: float, sigma: float, mode: str = "continuum", tau: float = 1.0,
             T: int = 1, K: int = 1) -> int:
    """Initial phase length; exploration covariance is the isotropic ``I/d`` in both modes."""
    if d < 1:
        raise UserError(f"--d must be >= 1, got {d}")
    if not 0 < delta < 1:
        raise UserError(f"--delta must lie in (0, 1), got {delta}")
    if sigma < 0:
        raise UserError(f"--sigma must be >= 0, got {sigma}")
    scale = 1.0
    if mode == "finite":
        if tau <= 0 or T < 1 or K < 1:
            raise UserError("finite mode needs --tau > 0, --T >= 1 and --K >= 1")
        scale = feature_scale(tau, T, K, delta)
    lam = 1.0 / d
    return theoretical_t0(d, delta, sigma, lam, lam, scale)


def cmd_t0(args) -> int:
    print(t0_value(args.d, args.delta, args.sigma, args.mode, args.tau, args.T, args.K))
    return EXIT_OK


def cmd_cluster(args) -> int:
    rng = keyed_generator(args.seed)
    rows = ingest_csv(args.csv, args.reward_col, None, args.rows, args.cols, rng, args.header)
    if args.k > len(rows):
        raise UserError(f"--k {args.k} exceeds the {len(rows)} ingested rows")
    arms = kmeans_cluster(rows, args.k, args.max_iters, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_arms(arms, out / "arms.csv")
    _err(f"clustered {len(rows)} rows into {args.k} arms (d={arms.centroids.shape[1]})")
    return EXIT_OK


def cmd_plot(args) -> int:
    plot_file(args.csv, args.out, args.kind)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="albandit", description="Adaptive linear bandit experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--threads", type=int, default=None)
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("t0", help="theoretical initial phase length")
    t.add_argument("--d", type=int, required=True)
    t.add_argument("--delta", type=float, required=True)
    t.add_argument("--sigma", type=float, required=True)
    t.add_argument("--mode", choices=("continuum", "finite"), default="continuum")
    t.add_argument("--tau", type=float, default=1.0)
    t.add_argument("--T", type=int, default=1)
    t.add_argument("--K", type=int, default=1)
    t.set_defaults(func=cmd_t0)

    c = sub.add_parser("cluster", help="cluster a rating CSV into arms")
    c.add_argument("csv")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--reward-col", type=int, default=0)
    c.add_argument("--header", action="store_true")
    c.add_argument("--rows", type=int, default=None)
    c.add_argument("--cols", type=int, default=None)
    c.add_argument("--max-iters", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_cluster)

    pl = sub.add_parser("plot", help="render a trace CSV as SVG")
    pl.add_argument("csv")
    pl.add_argument("--kind", choices=("regret", "snapshot"), default="regret")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USER
    try:
        return args.func(args)
    except (UserError, ConfigError, CorpusParseError, CorpusSchemaError, OSError, ValueError) as exc:
        _err(f"albandit {args.command}: {exc}")
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        _err(f"albandit {args.command}: internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

