"""Command line entry point: ``kbandit simulate`` and ``kbandit sweep``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .config import ConfigError, load_config, load_grid
from .harness import run_replicates, summarize, sweep, write_traces

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kbandit", description="Distributed kernel bandit simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration (all replicates)")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default="out")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")

    sw = sub.add_parser("sweep", help="run a grid of configurations")
    sw.add_argument("--config", required=True)
    sw.add_argument("--grid", required=True)
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--out", default="sweep_out")
    sw.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def _seed_override(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("KBANDIT_SEED")
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"KBANDIT_SEED must be an integer, got {env!r}") from None


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        seed = _seed_override(args)
        if seed is not None:
            cfg = replace(cfg, seed=seed).validated()
        grid = load_grid(args.grid) if args.command == "sweep" else None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            traces = run_replicates(cfg)
            for path in write_traces(traces, args.out, args.format):
                print(path)
            s = summarize(traces)
            print(f"{cfg.algorithm}: mean regret {s['mean_regret']:.4f}, "
                  f"mean scalars {s['mean_comm']:.0f}, mean syncs {s['mean_syncs']:.1f}")
        else:
            rows = sweep(cfg, grid, args.out, args.format)
            print(f"{len(rows)} grid points written to {args.out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logging.getLogger("kbandit").debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
