"""Command-line front end.

Exit status is 0 on success, 1 for configuration errors and 2 when the
problem is infeasible (unreachable session bounds or a power budget that
cannot carry the layers).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
import time
from dataclasses import replace

from .allocation import AllocationError, InfeasibleSessionError, solve_allocation
from .beams import LinkModel, ScheduleError, schedule
from .codec import CodecError
from .config import ConfigError, SyntheticSceneParams, emit_scenario, generate_scenario, load_config
from .harness import (ChannelConfig, ExperimentResult, HarnessConfig, HarnessError, default_links,
                      derive_seed, run_baseline_pipeline, run_optimal_pipeline, sweep_adaptivity,
                      sweep_capacity, sweep_reliability, write_atomic, write_result)
from .layered import EstimatorConfig, LayeredOptConfig, LayeredOptError, coordinate_descent, eval_objective
from .scene import DistortionModel, ScenarioError, aggregate_weights

DEFAULT_GRIDS = {
    "sweep-capacity": "4,6,8,10,12,14",
    "sweep-adaptivity": "0.05,0.1,0.2",
    "sweep-reliability": "0,0.02,0.04,0.06,0.08,0.1,0.12,0.14,0.16,0.18,0.2",
}


def _grid(text: str) -> list[float]:
    try:
        g = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if not g:
        raise ConfigError("grid must not be empty")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ConfigError("grid must be sorted ascending without repeats")
    return g


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(args, name: str, text: str, manifest: dict) -> None:
    write_atomic(os.path.join(args.out, f"{name}.csv"), text)
    lines = [f"{k} = {manifest[k]}" for k in sorted(manifest)]
    write_atomic(os.path.join(args.out, f"{name}.manifest.txt"), "\n".join(lines) + "\n")
    sys.stdout.write(text)
    print(f"wrote {os.path.join(args.out, name)}.csv")


def _layered(args, n_layers=None) -> LayeredOptConfig:
    return LayeredOptConfig(n_layers=n_layers or args.layers, delta_lambda=args.delta_lambda,
                            rate_grid_step=args.rate_grid_step,
                            estimator=EstimatorConfig(args.estimator, args.design_trials, args.seed),
                            erasure=args.erasure, symbol_size=args.symbol_size, refine=args.refine)


def _links(cfgfile, n: int) -> LinkModel:
    links = cfgfile.links if cfgfile is not None and cfgfile.links is not None else default_links(n)
    if len(links) != n:
        raise ConfigError(f"scenario defines {len(links)} beams but {n} layers are requested")
    return links


def _harness(args, cfgfile) -> HarnessConfig:
    layers = args.layers
    if cfgfile.layers is not None and not args.layers_given:
        layers = cfgfile.layers.count
    lc = replace(_layered(args, layers), erasure=0.0)
    return HarnessConfig(layered=lc, links=_links(cfgfile, layers), trials=args.trials)


def cmd_allocate(args) -> int:
    cf = load_config(args.scenario)
    spec = cf.scenario
    w = aggregate_weights(spec)
    res = solve_allocation(spec, w)
    header = [f"rate_{v.id}" for v in spec.viewpoints]
    _write(args, "allocation", _csv(header, [[repr(float(r)) for r in res.rates]]),
           {"objective": repr(res.objective), "kkt_residual": repr(res.kkt_residual),
            "session_distortions": " ".join(repr(float(x)) for x in res.session_distortions),
            "scenario": args.scenario})
    return 0


def cmd_layer_opt(args) -> int:
    cf = load_config(args.scenario)
    spec = cf.scenario
    try:
        i = spec.index_of(args.uav)
    except KeyError:
        raise ConfigError(f"unknown uav id {args.uav}") from None
    rate = args.rate
    if rate is None:
        rate = float(solve_allocation(spec, aggregate_weights(spec)).rates[i])
        if not rate > 0:
            raise LayeredOptError(f"uav {args.uav} is allocated zero rate; pass --rate to design it anyway")
    layers = cf.layers.count if cf.layers is not None and not args.layers_given else args.layers
    cfg = _layered(args, layers)
    if cf.layers is not None and not args.delta_given:
        cfg = replace(cfg, delta_lambda=cf.layers.delta_lambda)
    model = DistortionModel(spec.viewpoints[i].beta)
    t0 = time.perf_counter()
    d = coordinate_descent(model, rate, cfg)
    manifest = {"uav": args.uav, "rate": repr(rate), "expected_distortion": repr(d.expected_distortion),
                "trace": " ".join(repr(x) for x in d.trace), "seed": args.seed,
                "estimator": f"{args.estimator} x {args.design_trials}", "sent": d.sent,
                "seconds": f"{time.perf_counter() - t0:.3f}"}
    if cf.layers is not None and cf.layers.lam is not None:
        ref, _ = eval_objective(d.allocation, cf.layers.lam, model, cfg, d.sent)
        manifest["scenario_lambda_distortion"] = repr(ref)
    rows = [[l + 1, repr(r), c, repr(lam), repr(float(p))]
            for l, (r, c, lam, p) in enumerate(zip(d.allocation.layer_rates, d.allocation.counts,
                                                   d.lam.lam, d.prefix_probabilities[1:]))]
    _write(args, "layers", _csv(["layer", "layer_rate", "source_symbols", "lambda", "prefix_probability"],
                                rows), manifest)
    return 0


def cmd_power(args) -> int:
    rates = _grid_any(args.rates)
    if args.gains is not None:
        gains = _grid_any(args.gains)
        if len(gains) != len(rates):
            raise ConfigError("need one gain per layer rate")
        links = LinkModel.uniform(gains, args.bandwidth, args.noise_density)
    elif args.scenario:
        links = _links(load_config(args.scenario), len(rates))
    else:
        links = default_links(len(rates))
    s = schedule(rates, links, args.budget)
    rows = [[l + 1, b + 1, repr(float(r)), repr(float(p)), repr(s.total_power), int(s.feasible)]
            for l, (r, b, p) in enumerate(zip(rates, s.assignment, s.powers))]
    _write(args, "power", _csv(["layer", "beam", "rate", "power", "total_power", "feasible"], rows),
           {"total_power": repr(s.total_power), "budget": repr(args.budget), "feasible": s.feasible})
    return 0 if s.feasible else 2


def _grid_any(text: str) -> list[float]:
    try:
        g = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None
    if not g:
        raise ConfigError("list must not be empty")
    return g


def cmd_simulate(args) -> int:
    cf = load_config(args.scenario)
    spec = cf.scenario
    cfg = _harness(args, cf)
    cfg = replace(cfg, layered=replace(cfg.layered, erasure=args.erasure))
    ch = ChannelConfig(args.erasure, args.capacity_actual, spec.capacity)
    t0 = time.perf_counter()
    row, _ = run_optimal_pipeline(spec, ch, cfg, derive_seed(args.seed, 0), sweep_var=args.erasure)
    base = run_baseline_pipeline(spec, ch, cfg, derive_seed(args.seed, 0), sweep_var=args.erasure)
    meta = {"sweep": "simulate", "seed": args.seed, "trials": args.trials,
            "config_hash": hashlib.sha256(repr((spec, cfg, ch)).encode()).hexdigest(),
            "timings": [("simulate", args.erasure, time.perf_counter() - t0)]}
    write_result(ExperimentResult([row, base], meta), args.out, "simulate")
    return 0


def cmd_sweep(args) -> int:
    cf = load_config(args.scenario)
    spec = cf.scenario
    cfg = _harness(args, cf)
    grid = _grid(args.grid or DEFAULT_GRIDS[args.command])
    if args.command == "sweep-capacity":
        res = sweep_capacity(spec, grid, cfg, args.seed)
    elif args.command == "sweep-adaptivity":
        if any(not 0 <= g < 1 for g in grid):
            raise ConfigError("capacity mismatch values must lie in [0, 1)")
        res = sweep_adaptivity(spec, grid, cfg, args.seed)
    else:
        if any(not 0 <= g < 1 for g in grid):
            raise ConfigError("erasure rates must lie in [0, 1)")
        res = sweep_reliability(spec, grid, cfg, args.seed)
    write_result(res, args.out, args.command.replace("-", "_"))
    return 0


def cmd_gen_scenario(args) -> int:
    params = SyntheticSceneParams(args.surface_std, args.color_std, args.quant_step, args.uavs,
                                  args.sessions, args.capacity)
    spec = generate_scenario(params, args.seed)
    path = args.scenario_out or os.path.join(args.out, "scenario.txt")
    write_atomic(path, emit_scenario(spec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1000, help="Monte-Carlo channel trials")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--estimator", choices=("rank", "hall"), default="hall")
    common.add_argument("--design-trials", type=int, default=1000,
                        help="estimator trials per objective evaluation")
    common.add_argument("--grid", help="comma-separated sweep grid")
    common.add_argument("--delta-lambda", type=float, default=0.05)
    common.add_argument("--layers", type=int, default=3)
    common.add_argument("--rate-grid-step", type=int, default=4, help="layer-rate search step in symbols")
    common.add_argument("--symbol-size", type=int, default=256)
    common.add_argument("--erasure", type=float, default=0.0)
    common.add_argument("--no-refine", dest="refine", action="store_false",
                        help="plain window descent without the layer-rate search")

    p = argparse.ArgumentParser(prog="uavsense", description="UAV swarm sensing and delivery optimizer")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("allocate", parents=[common], help="sampling-rate allocation")
    lo = sub.add_parser("layer-opt", parents=[common], help="layered design for one UAV")
    lo.add_argument("--uav", type=int, required=True)
    lo.add_argument("--rate", type=float, help="total rate (default: allocated rate)")
    pw = sub.add_parser("power", parents=[common], help="layer-to-beam power schedule")
    pw.add_argument("--rates", required=True, help="comma-separated layer rates")
    pw.add_argument("--gains", help="comma-separated beam gains")
    pw.add_argument("--bandwidth", type=float, default=1.0)
    pw.add_argument("--noise-density", type=float, default=1.0)
    pw.add_argument("--budget", type=float, default=float("inf"))
    sm = sub.add_parser("simulate", parents=[common], help="one delivery experiment")
    sm.add_argument("--capacity-actual", type=float)
    for name in DEFAULT_GRIDS:
        sub.add_parser(name, parents=[common], help=f"{name.split('-')[1]} sweep")
    g = sub.add_parser("gen-scenario", parents=[common], help="write a synthetic scenario file")
    g.add_argument("--surface-std", type=float, default=1.0)
    g.add_argument("--color-std", type=float, default=1.0)
    g.add_argument("--quant-step", type=float, default=1.0)
    g.add_argument("--uavs", type=int, default=19)
    g.add_argument("--sessions", type=int, default=6)
    g.add_argument("--capacity", type=float, default=12.0)
    g.add_argument("--scenario-out", help="output path (default: OUT/scenario.txt)")
    return p


_COMMANDS = {"allocate": cmd_allocate, "layer-opt": cmd_layer_opt, "power": cmd_power,
             "simulate": cmd_simulate, "gen-scenario": cmd_gen_scenario,
             **{name: cmd_sweep for name in DEFAULT_GRIDS}}
_NEEDS_SCENARIO = {"allocate", "layer-opt", "simulate", *DEFAULT_GRIDS}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.layers_given = any(a == "--layers" or a.startswith("--layers=") for a in argv)
    args.delta_given = any(a == "--delta-lambda" or a.startswith("--delta-lambda=") for a in argv)
    try:
        if args.command in _NEEDS_SCENARIO and not args.scenario:
            raise ConfigError("--scenario is required")
        if args.trials < 1 or args.design_trials < 1 or args.layers < 1:
            raise ConfigError("--trials, --design-trials and --layers must be positive")
        if not 0 <= args.erasure < 1:
            raise ConfigError("--erasure must lie in [0, 1)")
        return _COMMANDS[args.command](args)
    except InfeasibleSessionError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 2
    except (ConfigError, ScenarioError, AllocationError, CodecError, LayeredOptError, ScheduleError,
            HarnessError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
