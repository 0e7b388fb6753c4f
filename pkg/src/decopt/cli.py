"""Command-line entry point.

Subcommands:
    run     execute one configuration (flags override an optional config file)
    preset  execute a named experiment bundle
    topo    print a topology's weight matrix and its rho
    check   short seeded run of every algorithm with invariant checks enabled

Exit codes: 0 success, 1 configuration error, 2 numerical failure of all
seeds (or an invariant violation from ``check``).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import ConfigError, DecoptError, InvariantViolation
from .runner import (
    PRESET_NAMES,
    RunConfig,
    build_graph,
    config_from_ini,
    resolve_run_id,
    run,
    run_preset,
    validate_config,
)
from .topology import mixing_for

WORKERS_ENV = "DECOPT_WORKERS"


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; configuration problems are
    # exit code 1 in this tool, so remap.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_run_flags(p: _Parser):
    p.add_argument("--config", help="config file (key=value sections); flags override")
    p.add_argument("--algorithm", choices=("dsgd", "dsgt", "dasagt", "dnasa"))
    p.add_argument("--topology", choices=("ring", "random", "ladder", "complete"))
    p.add_argument("--p-edge", type=float, dest="p_edge")
    p.add_argument("--topology-seed", type=int, dest="topology_seed")
    p.add_argument("--problem", choices=("lsq", "lsq_spike", "hetero_quad"))
    p.add_argument("--d", type=int)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--theta-star-seed", type=int, dest="theta_star_seed")
    p.add_argument("--data-seed", type=int, dest="data_seed")
    p.add_argument("--schedule", choices=("dnasa_fixed", "dnasa_diminishing",
                                          "sqrt_diminishing", "asagt_alpha", "constant"))
    p.add_argument("--eta-scale", type=float, dest="eta_scale")
    p.add_argument("--alpha-const", type=float, dest="alpha_const")
    p.add_argument("--n", type=int)
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--seeds", help="comma-separated list, e.g. 0,1,2")
    p.add_argument("--check-invariants", action="store_true", default=None,
                   dest="check_invariants")
    p.add_argument("--test-loss-mode", choices=("exact", "finite"), dest="test_loss_mode")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("--out")
    p.add_argument("--run-id", dest="run_id")
    p.add_argument("--workers", type=int)
    p.add_argument("--record-timing", action="store_true", default=None,
                   dest="record_timing")


def _resolve_config(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = config_from_ini(fh.read())
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {args.config}")
    else:
        cfg = RunConfig()
    overrides = {}
    for key in (
        "algorithm", "topology", "p_edge", "topology_seed", "problem", "d",
        "noise_sigma", "batch_size", "theta_star_seed", "data_seed", "schedule",
        "eta_scale", "alpha_const", "n", "T", "eval_every", "check_invariants",
        "test_loss_mode", "n_test", "out", "run_id", "workers", "record_timing",
    ):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.seeds is not None:
        try:
            overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
        except ValueError:
            raise ConfigError(f"seeds: could not parse {args.seeds!r}")
    # Worker-count precedence: flag > DECOPT_WORKERS > config file > default.
    if args.workers is None and os.environ.get(WORKERS_ENV):
        overrides["workers"] = _default_workers()
    return replace(cfg, **overrides)


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    validate_config(cfg)
    result = run(cfg)
    cfg = result.config
    for seed in sorted(result.failures):
        print(f"seed {seed}: aborted at iteration {result.failures[seed]}",
              file=sys.stderr)
    if result.all_failed:
        print("all seeds failed numerically", file=sys.stderr)
        return 2
    if cfg.out is not None:
        print(f"wrote {len(result.seed_csv_paths)} seed CSVs and "
              f"{result.aggregate_csv_path}")
    else:
        final = result.per_seed[cfg.seeds[0]][-1]
        print(f"{cfg.run_id}: final grad_norm {final.grad_norm:.6g}, "
              f"test_loss {final.test_loss:.6g} (seed {cfg.seeds[0]})")
    return 0


def _cmd_preset(args) -> int:
    workers = args.workers if args.workers is not None else _default_workers()
    out = run_preset(args.name, out=args.out, workers=workers)
    print(f"preset {args.name}: {len(out['results'])} configs written to {args.out}")
    return 0


def _cmd_topo(args) -> int:
    cfg = RunConfig(topology=args.topology, n=args.n, p_edge=args.p_edge,
                    topology_seed=args.topology_seed)
    mixing = mixing_for(build_graph(cfg))
    for row in mixing.w:
        print(" ".join(f"{v:.6f}" for v in row))
    print(f"rho = {mixing.rho:.4f}")
    return 0


_CHECK_SCHEDULES = {
    "dsgd": ("sqrt_diminishing", 0.05),
    "dsgt": ("sqrt_diminishing", 0.05),
    "dasagt": ("asagt_alpha", 0.05),
    "dnasa": ("dnasa_diminishing", 1.0),
}


def _cmd_check(args) -> int:
    failures = 0
    cases = [(algo, args.n) for algo in ("dsgd", "dsgt", "dasagt", "dnasa")]
    cases += [(algo, 1) for algo in ("dsgt", "dnasa")]  # degenerate network
    for algo, n in cases:
        sched, eta_scale = _CHECK_SCHEDULES[algo]
        topo = "ring" if n >= 3 else "complete"
        cfg = RunConfig(algorithm=algo, topology=topo, problem="lsq", d=args.d,
                        noise_sigma=0.1, schedule=sched, eta_scale=eta_scale, n=n,
                        T=args.T, eval_every=args.T, seeds=(0,),
                        check_invariants=True)
        try:
            result = run(cfg)
        except InvariantViolation as exc:
            print(f"FAIL {algo} (n={n}): {exc}")
            failures += 1
            continue
        if result.failures:
            print(f"FAIL {algo} (n={n}): numerical failure at iteration "
                  f"{result.failures[0]}")
            failures += 1
        else:
            print(f"ok {algo} (n={n}): {args.T} iterations, all per-step "
                  f"invariants held")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = _Parser(prog="decopt",
                     description="decentralized stochastic optimization simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one configuration")
    _add_run_flags(p_run)

    p_preset = sub.add_parser("preset", help="run a named experiment bundle")
    p_preset.add_argument("name", choices=PRESET_NAMES)
    p_preset.add_argument("--out", required=True)
    p_preset.add_argument("--workers", type=int)

    p_topo = sub.add_parser("topo", help="print mixing matrix and rho")
    p_topo.add_argument("--topology", required=True,
                        choices=("ring", "random", "ladder", "complete"))
    p_topo.add_argument("--n", type=int, required=True)
    p_topo.add_argument("--p-edge", type=float, default=0.8, dest="p_edge")
    p_topo.add_argument("--topology-seed", type=int, default=0, dest="topology_seed")

    p_check = sub.add_parser("check", help="invariant smoke run for every algorithm")
    p_check.add_argument("--T", type=int, default=200, dest="T")
    p_check.add_argument("--n", type=int, default=8)
    p_check.add_argument("--d", type=int, default=20)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "preset":
            return _cmd_preset(args)
        if args.command == "topo":
            return _cmd_topo(args)
        return _cmd_check(args)
    except ConfigError as exc:
        print(f"decopt: configuration error: {exc}", file=sys.stderr)
        return 1
    except DecoptError as exc:
        print(f"decopt: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
