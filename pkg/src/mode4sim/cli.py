"""Command-line front-end: simulate / sweep / analyze / hidden-node.

Exit codes: 2 for configuration problems, 3 for trace I/O failures. All
result files are plain CSV plus a key:value summary echoing the fully
resolved configuration, so a (config, seed) pair reproduces byte-identical
outputs.
"""
from __future__ import annotations

import argparse
from dataclasses import replace
import os
import sys

import numpy as np

from .analysis import (reallocation_probability, tbc_ccdf, tbc_distribution)
from .channel import ObstacleMapError
from .config import (SWEEPABLE_KEYS, ConfigError, RunConfig, load_config,
                     with_overrides)
from .engine import SimulationResult, run_hidden_node, run_scenario
from .metrics import MetricsError, ud_percentile
from .mobility import TraceError

EXIT_CONFIG = 2
EXIT_TRACE_IO = 3

UD_QUANTILES = (0.5, 0.9, 0.95, 0.99, 0.999, 0.9999)


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_run_outputs(result: SimulationResult, outdir: str):
    os.makedirs(outdir, exist_ok=True)
    centers, prr, samples = result.prr.by_bin()
    rows = ["bin_center_m,prr,samples"]
    for c, p, s in zip(centers, prr, samples):
        value = "nan" if np.isnan(p) else f"{p:.6f}"
        rows.append(f"{c:.1f},{value},{int(s)}")
    _write_lines(os.path.join(outdir, "prr_by_distance.csv"), rows)

    rows = ["q,seconds"]
    for q in UD_QUANTILES:
        try:
            rows.append(f"{q},{ud_percentile(result.ud, q):.4f}")
        except MetricsError:
            rows.append(f"{q},nan")
    _write_lines(os.path.join(outdir, "ud_percentiles.csv"), rows)

    rows = ["length_periods,count"]
    if len(result.hold_counts):
        hist = np.bincount(result.hold_counts)
        for length in np.flatnonzero(hist):
            rows.append(f"{int(length)},{int(hist[length])}")
    _write_lines(os.path.join(outdir, "hold_times.csv"), rows)

    summary = [
        f"pooled_prr: {result.prr.pooled():.6f}" if result.prr.neighbor_count.sum()
        else "pooled_prr: nan",
        f"beacons_sent: {result.beacons_sent}",
        f"reselections: {result.reselections}",
        f"mean_neighbors: {result.mean_neighbors:.3f}",
        f"half_duplex_violations: {result.half_duplex_violations}",
        f"half_duplex_pairs_checked: {result.half_duplex_pairs_checked}",
        f"ud_gaps_recorded: {result.ud.total_gaps}",
        f"warmup_s: {result.warmup_s}",
        f"seed: {result.seed}",
    ]
    for q in UD_QUANTILES:
        try:
            summary.append(f"ud_p{q}: {ud_percentile(result.ud, q):.4f}")
        except MetricsError:
            summary.append(f"ud_p{q}: nan")
    for key, value in result.config_items:
        summary.append(f"config.{key}: {value}")
    _write_lines(os.path.join(outdir, "summary.txt"), summary)


def _load_with_overrides(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trace", None):
        overrides["scenario"] = "trace"
        overrides["trace"] = args.trace
    if getattr(args, "highway", False):
        overrides["scenario"] = "highway"
        if cfg.trace:
            cfg = replace(cfg, trace=None)  # --highway supersedes a config trace
    if getattr(args, "vehicles", None) is not None:
        overrides["highway_vehicles"] = args.vehicles
    if getattr(args, "length_m", None) is not None:
        overrides["highway_length_m"] = args.length_m
    if getattr(args, "duration_s", None) is not None:
        overrides["duration_s"] = args.duration_s
    return with_overrides(cfg, **overrides)


def cmd_simulate(args) -> int:
    cfg = _load_with_overrides(args)
    result = run_scenario(cfg)
    write_run_outputs(result, args.out)
    print(f"pooled PRR {result.prr.pooled():.4f} over {result.beacons_sent} beacons "
          f"(mean neighbors {result.mean_neighbors:.1f}); outputs in {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.param not in SWEEPABLE_KEYS:
        raise ConfigError(f"unknown sweep parameter '{args.param}'")
    cast = SWEEPABLE_KEYS[args.param]
    values = [cast(v) for v in args.values.split(",") if v != ""]
    if not values:
        raise ConfigError("sweep needs at least one value")
    points = [with_overrides(cfg, **{args.param: value}) for value in values]
    # Points are independent seeded runs, so any worker count gives the
    # same results in the same order.
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_scenario, points))
    else:
        results = [run_scenario(point) for point in points]
    os.makedirs(args.out, exist_ok=True)
    combined = ["param,value,pooled_prr,ud_p0.999_s,mean_neighbors,beacons"]
    for value, result in zip(values, results):
        subdir = os.path.join(args.out, f"{args.param}={value}")
        write_run_outputs(result, subdir)
        try:
            ud999 = f"{ud_percentile(result.ud, 0.999):.4f}"
        except MetricsError:
            ud999 = "nan"
        combined.append(f"{args.param},{value},{result.prr.pooled():.6f},"
                        f"{ud999},{result.mean_neighbors:.3f},{result.beacons_sent}")
        print(f"{args.param}={value}: pooled PRR {result.prr.pooled():.4f}")
    _write_lines(os.path.join(args.out, "sweep_results.csv"), combined)
    return 0


def cmd_analyze(args) -> int:
    if args.t_sense_ms % args.beacon_period_ms != 0:
        raise ConfigError("t_sense_ms must be a multiple of the beacon period")
    dist = tbc_distribution(args.n_min, args.n_max, args.p_keep,
                            eps=args.eps, tbe_form=args.tbe_form)
    ccdf = tbc_ccdf(dist)
    os.makedirs(args.out, exist_ok=True)
    rows = ["hold_periods,hold_seconds,ccdf"]
    step = args.beacon_period_ms / 1000.0
    for n, value in enumerate(ccdf):
        rows.append(f"{n},{n * step:.4f},{value:.9f}")
    _write_lines(os.path.join(args.out, "tbc_ccdf.csv"), rows)
    n_star = args.t_sense_ms // args.beacon_period_ms
    p_r = reallocation_probability(dist, n_star)
    print(f"P_r({n_star} beacon periods) = {p_r:.6f} "
          f"(truncation error <= {dist.residual_mass:.2e})")
    print(f"mean hold {dist.mean() * step:.3f} s; ccdf written to "
          f"{os.path.join(args.out, 'tbc_ccdf.csv')}")
    return 0


def cmd_hidden_node(args) -> int:
    cfg = _load_with_overrides(args)
    acc = run_hidden_node(cfg, sample_every_periods=args.sample_every)
    os.makedirs(args.out, exist_ok=True)
    centers, prob, _pairs = acc.by_bin()
    rows = ["d_bin_m,probability"]
    for c, p in zip(centers, prob):
        value = "nan" if np.isnan(p) else f"{p:.6f}"
        rows.append(f"{c:.1f},{value}")
    _write_lines(os.path.join(args.out, "hidden_node.csv"), rows)
    summary = [f"hidden_node_probability: {acc.overall():.6f}",
               f"contributing_pair_samples: {int(acc.pair_count.sum())}",
               f"snapshots: {len(acc.snapshot_probs)}"]
    summary += [f"config.{k}: {v}" for k, v in cfg.resolved_items()]
    _write_lines(os.path.join(args.out, "summary.txt"), summary)
    print(f"hidden-node probability (all sampled instants): {acc.overall():.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mode4sim",
        description="Distributed sidelink resource-allocation simulator and analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_flags(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--trace", help="trace CSV (time_s,vehicle_id,x_m,y_m)")
        p.add_argument("--highway", action="store_true", help="synthetic highway scenario")
        p.add_argument("--vehicles", type=int, help="highway vehicle count")
        p.add_argument("--length-m", dest="length_m", type=float, help="highway ring length")
        p.add_argument("--duration-s", dest="duration_s", type=float, help="simulated seconds")

    p_sim = sub.add_parser("simulate", help="run one scenario and write metric CSVs")
    add_scenario_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run one scenario per parameter value")
    p_sweep.add_argument("--config", help="YAML config file")
    p_sweep.add_argument("--param", required=True, help="config key to sweep")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", default="out", help="output directory")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker processes for the sweep points")
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="closed-form hold-time statistics")
    p_an.add_argument("--n-min", type=int, default=5)
    p_an.add_argument("--n-max", type=int, default=15)
    p_an.add_argument("--p-keep", type=float, default=0.4)
    p_an.add_argument("--t-sense-ms", type=int, default=1000)
    p_an.add_argument("--eps", type=float, default=1e-6)
    p_an.add_argument("--beacon-period-ms", type=int, default=100)
    p_an.add_argument("--tbe-form", choices=("uniform", "one_over_n"), default="uniform")
    p_an.add_argument("--out", default="out")
    p_an.set_defaults(func=cmd_analyze)

    p_hn = sub.add_parser("hidden-node", help="hidden-node probability of a scenario")
    add_scenario_flags(p_hn)
    p_hn.add_argument("--sample-every", type=int, default=1,
                      help="sample one snapshot every N beacon periods")
    p_hn.set_defaults(func=cmd_hidden_node)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TraceError, OSError) as exc:
        # TraceError subclasses ValueError; match it before the config catch.
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE_IO
    except (ConfigError, ObstacleMapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
