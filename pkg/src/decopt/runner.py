"""Deterministic experiment orchestration.

One ``RunConfig`` fully determines a run: topology, problem, schedule,
algorithm, horizon and the seed list. ``run`` executes every seed (optionally
across a process pool), evaluates on a fixed cadence, and writes one CSV per
seed plus a seed-averaged aggregate and a manifest holding the resolved
config. Identical config + seed gives byte-identical CSVs regardless of the
worker count.

Named presets bundle the synthetic studies: the ring-topology speedup sweep
over the agent count, the spike-model comparison of all four algorithms
(baselines grid-searched over their stepsize scale), and a convergence
sanity run.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass, field, fields, replace
from io import StringIO

import numpy as np

from ._version import __version__
from .algorithms import ALGORITHMS, init_state, step
from .errors import ConfigError, InvariantViolation, NumericalError
from .metrics import CSV_FIELDS, MetricsRecord, evaluate
from .problems import PROBLEM_KINDS, make_problem
from .schedules import SCHEDULE_KINDS, Schedule
from .topology import Graph, complete, ladder, mixing_for, random_graph, ring

__all__ = [
    "RunConfig",
    "RunResult",
    "validate_config",
    "resolve_run_id",
    "run",
    "run_preset",
    "preset_configs",
    "PRESET_NAMES",
    "config_to_ini",
    "config_from_ini",
    "BASELINE_ETA_GRID",
]

TOPOLOGIES = ("ring", "random", "ladder", "complete")
BLOWUP_NORM = 1e12

# Stepsize-scale grid for the tuned baselines in the spike comparison.
BASELINE_ETA_GRID = (0.005, 0.01, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "dnasa"
    topology: str = "ring"
    p_edge: float = 0.8
    topology_seed: int = 0
    problem: str = "lsq"
    d: int = 100
    noise_sigma: float = 0.1
    batch_size: int = 1
    theta_star_seed: int = 0
    data_seed: int = 0
    schedule: str = "dnasa_diminishing"
    eta_scale: float = 1.0
    alpha_const: float = 1.0
    n: int = 8
    T: int = 1000
    eval_every: int = 10
    seeds: tuple = tuple(range(10))
    check_invariants: bool = False
    test_loss_mode: str = "exact"
    n_test: int = 10000
    out: str | None = None
    run_id: str | None = None
    workers: int = 1
    record_timing: bool = False


@dataclass
class RunResult:
    config: RunConfig
    per_seed: dict = field(default_factory=dict)  # seed -> list[MetricsRecord]
    failures: dict = field(default_factory=dict)  # seed -> abort iteration
    seed_csv_paths: dict = field(default_factory=dict)
    aggregate_csv_path: str | None = None
    manifest_path: str | None = None

    @property
    def all_failed(self) -> bool:
        return len(self.failures) == len(self.config.seeds)


def validate_config(cfg: RunConfig):
    """Reject inconsistent configs with a message naming the offending key."""
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm: unknown value {cfg.algorithm!r}, expected one of {ALGORITHMS}")
    if cfg.topology not in TOPOLOGIES:
        raise ConfigError(f"topology: unknown value {cfg.topology!r}, expected one of {TOPOLOGIES}")
    if cfg.problem not in PROBLEM_KINDS:
        raise ConfigError(f"problem: unknown value {cfg.problem!r}, expected one of {PROBLEM_KINDS}")
    if cfg.schedule not in SCHEDULE_KINDS:
        raise ConfigError(f"schedule: unknown value {cfg.schedule!r}, expected one of {SCHEDULE_KINDS}")
    if cfg.n < 1:
        raise ConfigError(f"n: must be >= 1, got {cfg.n}")
    if cfg.T < 1:
        raise ConfigError(f"T: must be >= 1, got {cfg.T}")
    if cfg.d < 1:
        raise ConfigError(f"d: must be >= 1, got {cfg.d}")
    if cfg.eval_every < 1:
        raise ConfigError(f"eval_every: must be >= 1, got {cfg.eval_every}")
    if not cfg.seeds:
        raise ConfigError("seeds: at least one seed is required")
    if any(s < 0 for s in cfg.seeds):
        raise ConfigError("seeds: seeds must be non-negative")
    if cfg.workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {cfg.workers}")
    if cfg.algorithm in ("dnasa", "dasagt"):
        sched = _build_schedule(cfg)
        if not sched.has_alpha:
            raise ConfigError(
                f"schedule: {cfg.schedule!r} carries no averaging weight, but "
                f"algorithm {cfg.algorithm!r} needs one"
            )
    else:
        _build_schedule(cfg)  # surface schedule-level errors (e.g. missing T)
    if cfg.test_loss_mode not in ("exact", "finite"):
        raise ConfigError(f"test_loss_mode: must be 'exact' or 'finite', got {cfg.test_loss_mode!r}")
    if cfg.n_test < 1:
        raise ConfigError(f"n_test: must be >= 1, got {cfg.n_test}")


def resolve_run_id(cfg: RunConfig) -> RunConfig:
    if cfg.run_id is not None:
        return cfg
    rid = f"{cfg.algorithm}_{cfg.topology}_n{cfg.n}_{cfg.problem}_{cfg.schedule}_T{cfg.T}"
    return replace(cfg, run_id=rid)


def build_graph(cfg: RunConfig) -> Graph:
    if cfg.topology == "ring":
        return ring(cfg.n)
    if cfg.topology == "ladder":
        return ladder(cfg.n)
    if cfg.topology == "complete":
        return complete(cfg.n)
    return random_graph(cfg.n, cfg.p_edge, cfg.topology_seed)


def _build_schedule(cfg: RunConfig) -> Schedule:
    return Schedule(
        kind=cfg.schedule,
        n=cfg.n,
        horizon=cfg.T,
        eta_scale=cfg.eta_scale,
        alpha_const=cfg.alpha_const,
    )


def _build_problem(cfg: RunConfig, seed: int):
    return make_problem(
        cfg.problem,
        cfg.d,
        cfg.n,
        noise_sigma=cfg.noise_sigma,
        batch_size=cfg.batch_size,
        theta_star_seed=cfg.theta_star_seed,
        seed=(cfg.data_seed, seed),
    )


def _run_one_seed(cfg: RunConfig, seed: int):
    """Worker body: returns (seed, records, failure_iteration_or_None)."""
    mixing = mixing_for(build_graph(cfg))
    problem = _build_problem(cfg, seed)
    sched = _build_schedule(cfg)
    state = init_state(cfg.algorithm, problem, cfg.n, cfg.d)
    needs_alpha = cfg.algorithm in ("dnasa", "dasagt")
    started = time.perf_counter()

    def measure():
        xbar = state.x.mean(axis=0)
        if not np.isfinite(xbar).all() or np.linalg.norm(xbar) > BLOWUP_NORM:
            raise NumericalError(
                f"averaged iterate blew up at iteration {state.t}", iteration=state.t
            )
        return evaluate(
            state, problem, cfg.algorithm, seed=seed,
            wall_time_ms=(time.perf_counter() - started) * 1000.0,
            test_loss_mode=cfg.test_loss_mode, n_test=cfg.n_test, test_seed=seed,
        )

    records = [measure()]
    failure = None
    try:
        for t in range(cfg.T):
            eta_t = sched.eta(t)
            alpha_t = sched.alpha(t) if needs_alpha else 0.0
            step(state, cfg.algorithm, mixing, eta_t, alpha_t, problem,
                 check=cfg.check_invariants)
            if state.t % cfg.eval_every == 0 or state.t == cfg.T:
                records.append(measure())
    except InvariantViolation:
        raise  # an invariant violation is an implementation bug, not divergence
    except NumericalError as exc:
        failure = exc.iteration if exc.iteration is not None else state.t
    return seed, records, failure


def run(cfg: RunConfig) -> RunResult:
    """Execute every seed of ``cfg``; write CSVs and a manifest when ``out`` is set."""
    validate_config(cfg)
    cfg = resolve_run_id(cfg)
    started = time.perf_counter()

    seeds = list(cfg.seeds)
    outcomes = {}
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for seed, records, failure in pool.map(
                _run_one_seed, [cfg] * len(seeds), seeds
            ):
                outcomes[seed] = (records, failure)
    else:
        for seed in seeds:
            seed, records, failure = _run_one_seed(cfg, seed)
            outcomes[seed] = (records, failure)

    result = RunResult(config=cfg)
    for seed in seeds:
        records, failure = outcomes[seed]
        result.per_seed[seed] = records
        if failure is not None:
            result.failures[seed] = failure

    if cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)
        for seed in seeds:
            path = os.path.join(cfg.out, f"{cfg.run_id}_seed{seed}.csv")
            _write_seed_csv(path, cfg, seed, result.per_seed[seed])
            result.seed_csv_paths[seed] = path
        result.aggregate_csv_path = os.path.join(cfg.out, f"{cfg.run_id}_aggregate.csv")
        _write_aggregate_csv(result.aggregate_csv_path, cfg, result.per_seed)
        result.manifest_path = os.path.join(cfg.out, f"{cfg.run_id}_manifest.txt")
        _write_manifest(result.manifest_path, cfg, result.failures,
                        time.perf_counter() - started)
    return result


# ---------------------------------------------------------------------------
# CSV / manifest serialization
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _write_seed_csv(path: str, cfg: RunConfig, seed: int, records):
    lines = [",".join(CSV_FIELDS)]
    for r in records:
        wall = r.wall_time_ms if cfg.record_timing else 0.0
        lines.append(",".join((
            cfg.run_id, str(seed), str(r.t),
            _fmt(r.grad_norm), _fmt(r.test_loss), _fmt(r.consensus_x),
            _fmt(r.consensus_aux), _fmt(r.tracking_err), _fmt(wall),
        )))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


AGG_METRICS = ("grad_norm", "test_loss", "consensus_x", "consensus_aux", "tracking_err")


def _write_aggregate_csv(path: str, cfg: RunConfig, per_seed):
    header = ["run_id", "t", "n_seeds"]
    for m in AGG_METRICS:
        header += [f"mean_{m}", f"std_{m}"]
    lines = [",".join(header)]
    by_t = {}
    for seed in cfg.seeds:
        for r in per_seed[seed]:
            by_t.setdefault(r.t, []).append(r)
    for t in sorted(by_t):
        rows = by_t[t]
        cells = [cfg.run_id, str(t), str(len(rows))]
        for m in AGG_METRICS:
            vals = np.array([getattr(r, m) for r in rows])
            cells.append(_fmt(vals.mean()))
            cells.append(_fmt(vals.std(ddof=1) if len(vals) > 1 else 0.0))
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# Config keys grouped into manifest/config-file sections.
_SECTIONS = {
    "run": ("algorithm", "n", "T", "eval_every", "seeds", "check_invariants",
            "workers", "record_timing", "run_id", "out"),
    "topology": ("topology", "p_edge", "topology_seed"),
    "problem": ("problem", "d", "noise_sigma", "batch_size", "theta_star_seed",
                "data_seed"),
    "schedule": ("schedule", "eta_scale", "alpha_const"),
    "evaluation": ("test_loss_mode", "n_test"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _encode(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _decode(name: str, raw: str):
    ftype = _FIELD_TYPES[name]
    if ftype == "tuple":
        return tuple(int(v) for v in raw.split(",") if v != "")
    if ftype == "bool":
        if raw not in ("true", "false"):
            raise ConfigError(f"{name}: expected true/false, got {raw!r}")
        return raw == "true"
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return None if raw == "" else raw  # str | None


def config_to_ini(cfg: RunConfig) -> str:
    """Flat key=value text, sections per module; re-parses to the same config."""
    out = StringIO()
    for section, keys in _SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            out.write(f"{key} = {_encode(getattr(cfg, key))}\n")
        out.write("\n")
    return out.getvalue()


def config_from_ini(text: str) -> RunConfig:
    parser = ConfigParser()
    parser.optionxform = str  # keep key case (the horizon key is T)
    parser.read_string(text)
    values = {}
    for section, keys in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"{key}: unknown key in section [{section}]")
            values[key] = _decode(key, raw)
    return replace(RunConfig(), **values)


def _write_manifest(path: str, cfg: RunConfig, failures, elapsed_s: float):
    text = config_to_ini(cfg)
    meta = [
        "[meta]",
        f"library_version = {__version__}",
        f"elapsed_seconds = {elapsed_s:.3f}",
        "failures = " + ";".join(f"{s}:{t}" for s, t in sorted(failures.items())),
        "",
    ]
    with open(path, "w") as fh:
        fh.write(text + "\n".join(meta))


def load_manifest_config(path: str) -> RunConfig:
    with open(path) as fh:
        return config_from_ini(fh.read())


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _speedup_configs(out, workers):
    cfgs = []
    for sched in ("dnasa_fixed", "dnasa_diminishing"):
        for n in (5, 10, 20):
            cfgs.append(RunConfig(
                algorithm="dnasa", topology="ring", problem="lsq", d=100,
                noise_sigma=0.1, batch_size=1, schedule=sched, n=n, T=15000,
                eval_every=10, seeds=tuple(range(10)), out=out, workers=workers,
                run_id=f"linear_speedup_{sched}_n{n}",
            ))
    return cfgs


def _spike_configs(out, workers):
    base = dict(topology="ring", problem="lsq_spike", d=100, noise_sigma=0.1,
                batch_size=1, n=8, T=3000, eval_every=10,
                seeds=tuple(range(10)), out=out, workers=workers)
    cfgs = [RunConfig(algorithm="dnasa", schedule="dnasa_diminishing",
                      run_id="spike_compare_dnasa", **base)]
    for algo in ("dsgd", "dsgt", "dasagt"):
        sched = "asagt_alpha" if algo == "dasagt" else "sqrt_diminishing"
        for eta in BASELINE_ETA_GRID:
            cfgs.append(RunConfig(
                algorithm=algo, schedule=sched, eta_scale=eta,
                run_id=f"spike_compare_{algo}_eta{eta}", **base,
            ))
    return cfgs


def _sanity_configs(out, workers):
    return [RunConfig(
        algorithm="dnasa", topology="ring", problem="lsq", d=100, noise_sigma=0.1,
        batch_size=1, schedule="dnasa_diminishing", n=10, T=16000, eval_every=10,
        seeds=tuple(range(10)), out=out, workers=workers,
        run_id="convergence_sanity_dnasa_n10",
    )]


_PRESETS = {
    "linear_speedup": _speedup_configs,
    "spike_compare": _spike_configs,
    "convergence_sanity": _sanity_configs,
}

PRESET_NAMES = tuple(_PRESETS)


def preset_configs(name: str, out: str | None = None, workers: int = 1):
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available presets: {', '.join(PRESET_NAMES)}"
        )
    return _PRESETS[name](out, workers)


def final_metric_stats(result: RunResult, metric: str):
    """Across-seed mean and standard error of a metric at t = T.

    Seeds whose run aborted before T contribute +inf, so diverged configs
    can never look good.
    """
    vals = []
    for seed in result.config.seeds:
        records = result.per_seed[seed]
        if records and records[-1].t == result.config.T:
            vals.append(getattr(records[-1], metric))
        else:
            vals.append(float("inf"))
    arr = np.array(vals)
    mean = float(arr.mean())
    if len(arr) > 1 and np.isfinite(arr).all():
        se = float(arr.std(ddof=1) / math.sqrt(len(arr)))
    else:
        se = float("nan")
    return mean, se


def _prefix_running_average(result: RunResult, horizon: int) -> float:
    """Across-seed mean of the running-average gradient norm over t <= horizon."""
    per_seed = []
    for seed in result.config.seeds:
        vals = [r.grad_norm for r in result.per_seed[seed] if r.t <= horizon]
        per_seed.append(float(np.mean(vals)))
    return float(np.mean(per_seed))


def run_preset(name: str, out: str | None = None, workers: int = 1) -> dict:
    """Run a preset bundle, write per-config outputs plus a summary CSV."""
    cfgs = preset_configs(name, out, workers)
    results = {cfg.run_id: run(cfg) for cfg in cfgs}
    summary = {}
    lines = []

    if name in ("linear_speedup", "convergence_sanity"):
        lines.append("run_id,final_mean_grad_norm,final_se_grad_norm,"
                     "final_mean_test_loss,final_se_test_loss")
        for rid, res in results.items():
            g_mean, g_se = final_metric_stats(res, "grad_norm")
            l_mean, l_se = final_metric_stats(res, "test_loss")
            summary[rid] = {
                "final_mean_grad_norm": g_mean, "final_se_grad_norm": g_se,
                "final_mean_test_loss": l_mean, "final_se_test_loss": l_se,
            }
            lines.append(f"{rid},{_fmt(g_mean)},{_fmt(g_se)},{_fmt(l_mean)},{_fmt(l_se)}")
        if name == "convergence_sanity":
            res = next(iter(results.values()))
            summary["running_avg_grad_norm"] = {
                h: _prefix_running_average(res, h) for h in (1000, 4000, 16000)
            }

    elif name == "spike_compare":
        lines.append("run_id,algorithm,eta_scale,final_mean_test_loss,final_mean_grad_norm")
        per_algo = {}
        for cfg in cfgs:
            res = results[cfg.run_id]
            l_mean, _ = final_metric_stats(res, "test_loss")
            g_mean, _ = final_metric_stats(res, "grad_norm")
            lines.append(f"{cfg.run_id},{cfg.algorithm},{_fmt(cfg.eta_scale)},"
                         f"{_fmt(l_mean)},{_fmt(g_mean)}")
            best = per_algo.get(cfg.algorithm)
            if best is None or l_mean < best["final_mean_test_loss"]:
                per_algo[cfg.algorithm] = {
                    "run_id": cfg.run_id, "eta_scale": cfg.eta_scale,
                    "final_mean_test_loss": l_mean, "final_mean_grad_norm": g_mean,
                }
        summary["best_per_algorithm"] = per_algo

    if out is not None and lines:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, f"{name}_summary.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return {"results": results, "summary": summary}
