"""Command line pipeline.

    glidelab ingest    --data market.csv --out real.csv
    glidelab fit       --data market.csv --out params.json
    glidelab solve     --params params.json --scenario scenario.json --match-constant 0.6
    glidelab simulate  --params params.json --scenario scenario.json --strategy glide.json ...
    glidelab bootstrap --data market.csv --scenario scenario.json --strategy policy.json ...
    glidelab replay    --data market.csv --scenario scenario.json --strategy ... --start 1985-01
    glidelab report    --config experiment.json

Every subcommand accepts ``--config FILE``; keys in that JSON object
override the corresponding flags. Exit status: 0 ok, 1 computational
failure, 2 input or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import report as rp
from .adaptive import GridConfig, MCConfig, calibrate_target, policy_from_json, save_policy, solve_policy
from .errors import GlidelabError, InputError
from .fixtures import FIXTURE_PATH
from .glide import PeriodMoments, optimize_glide, wealth_moments
from .jump_model import KouParams, fit_mle, log_return_density, with_bond_drift
from .market_data import format_month, load_real_market, parse_month, standardize_returns, write_real_csv
from .simulation import (
    DEFAULT_THRESHOLDS,
    histogram,
    replay_historical,
    run_bootstrap,
    run_monte_carlo,
    summary_stats,
)
from .strategy import Adaptive, Constant, Glide, Scenario, strategy_from_json

log = logging.getLogger("glidelab")


class ConfigError(InputError):
    pass


# -- helpers ----------------------------------------------------------------


def _resolve_data(path: Optional[str]) -> str:
    if path in (None, "", "fixture"):
        return FIXTURE_PATH
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return path


def _read_json(path: str):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_params(path: str) -> KouParams:
    return KouParams.from_dict(_read_json(path))


def load_scenario(spec) -> Scenario:
    if spec is None:
        return Scenario()
    if isinstance(spec, dict):
        return Scenario.from_dict(spec)
    return Scenario.from_dict(_read_json(spec))


def load_strategy_spec(spec, name: Optional[str] = None):
    """``constant:0.6`` | a JSON file (tagged union or policy file) | a dict. Returns (name, strategy, inputs)."""
    inputs = []
    if isinstance(spec, dict):
        strat = strategy_from_json(spec)
        return name or next(iter(spec)), strat, inputs
    if isinstance(spec, str) and spec.startswith("constant:"):
        p = float(spec.split(":", 1)[1])
        return name or "constant", Constant(p), inputs
    obj = _read_json(spec)
    inputs.append(spec)
    stem = os.path.splitext(os.path.basename(spec))[0]
    if isinstance(obj, dict) and obj.get("format", "").startswith("glidelab.policy"):
        return name or "adaptive", Adaptive(policy_from_json(obj), source=spec), inputs
    if isinstance(obj, dict) and "adaptive" in obj:
        path = obj["adaptive"]
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.abspath(spec)), path)
        inputs.append(path)
    strat = strategy_from_json(obj, os.path.dirname(os.path.abspath(spec)))
    kind = {"Constant": "constant", "Glide": "glide", "Adaptive": "adaptive"}.get(type(strat).__name__, stem)
    return name or kind, strat, inputs


def _strategies(specs) -> tuple:
    out, inputs = {}, []
    if isinstance(specs, dict):
        items = list(specs.items())
    else:
        items = [(None, s) for s in (specs or [])]
    for name, s in items:
        n, strat, ins = load_strategy_spec(s, name)
        base, k = n, 2
        while n in out:
            n = f"{base}_{k}"
            k += 1
        out[n] = strat
        inputs += ins
    if not out:
        raise ConfigError("no strategies given")
    return out, inputs


def _config_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def _thresholds(args):
    return tuple(float(x) for x in (args.thresholds or DEFAULT_THRESHOLDS))


# -- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    data = _resolve_data(args.data)
    m = load_real_market(data)
    with open(args.out, "w", newline="") as fh:
        fh.write("# provenance: " + json.dumps(rp.provenance("ingest", _config_dict(args), [data]), sort_keys=True) + "\n")
        write_real_csv(m, fh)
    print(f"{len(m.equity)} months {format_month(m.equity.start_month)}..{format_month(m.equity.end_month)}; "
          f"real bond drift r = {m.bond_drift:.6f}/yr -> {args.out}")
    return 0


def _returns_histogram(m, params: KouParams, bins: int = 80):
    z = standardize_returns(m.equity_returns).log_returns
    edges, dens = histogram(z, bins=bins, range_=(-8.0, 8.0))
    r = m.equity_returns.log_returns
    loc, scale = r.mean(), r.std(ddof=1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    fitted = scale * log_return_density(params, 1.0 / 12.0, loc + scale * mid)
    normal = np.exp(-0.5 * mid ** 2) / math.sqrt(2 * math.pi)
    return [("monthly_return_std", a, b, d, n, f) for a, b, d, n, f in zip(edges[:-1], edges[1:], dens, normal, fitted)]


def cmd_fit(args) -> int:
    data = _resolve_data(args.data)
    m = load_real_market(data)
    res = fit_mle(m.equity_returns, 1.0 / 12.0)
    params = with_bond_drift(res.params, m.bond_drift)
    out = params.to_dict(dt_months=1)
    prov = rp.provenance("fit", _config_dict(args), [data])
    out["log_likelihood"] = res.log_likelihood
    out["gaussian_log_likelihood"] = res.gaussian_log_likelihood
    out["jumps_significant"] = bool(res.jumps_significant)
    out["provenance"] = prov
    rp.write_json(args.out, out)
    if args.histogram:
        rp.write_histogram(args.histogram, _returns_histogram(m, params), prov)
    print(json.dumps(params.to_dict(), indent=1))
    print(f"log-likelihood {res.log_likelihood:.3f} (normal: {res.gaussian_log_likelihood:.3f}) -> {args.out}")
    return 0


def _grid_config(args) -> GridConfig:
    return GridConfig(n_wealth=args.n_wealth, n_quad=args.n_quad, n_controls=args.n_controls)


def cmd_solve(args) -> int:
    params = load_params(args.params)
    scenario = load_scenario(args.scenario)
    inputs = [args.params] + ([args.scenario] if isinstance(args.scenario, str) else [])
    pm = PeriodMoments.from_params(params, scenario.dt)
    gcfg = _grid_config(args)
    mc = MCConfig(n_paths=args.n_paths, seed=args.seed)
    chosen = [x is not None for x in (args.goal_mean, args.target, args.match_constant)]
    if sum(chosen) != 1:
        raise ConfigError("give exactly one of --goal-mean, --target, --match-constant")
    if args.match_constant is not None:
        goal = wealth_moments(np.full(scenario.T, args.match_constant), scenario, pm)[0]
    else:
        goal = args.goal_mean
    if args.target is not None:
        w_star = args.target
        grid = solve_policy(params, scenario, w_star, gcfg)
        w, _ = run_monte_carlo(Adaptive(grid), scenario, params, mc.n_paths, mc.seed)
        goal = float(np.mean(w))
    else:
        w_star, grid = calibrate_target(params, scenario, goal, mc, gcfg)
    glide = optimize_glide(scenario, pm, goal)
    prov = rp.provenance("solve", _config_dict(args), inputs)
    save_policy(grid, args.policy_out, extra=prov)
    rp.write_json(args.glide_out, {"glide": [float(v) for v in glide], "target_mean": goal, "provenance": prov})
    print(f"W* = {w_star:,.2f}  matched E[W_T] = {goal:,.2f}")
    print(f"policy -> {args.policy_out}; glide -> {args.glide_out}")
    return 0


def cmd_simulate(args) -> int:
    params = load_params(args.params)
    scenario = load_scenario(args.scenario)
    strats, ins = _strategies(args.strategy)
    inputs = [args.params] + ins + ([args.scenario] if isinstance(args.scenario, str) else [])
    th = _thresholds(args)
    stats, diags, hist = {}, {}, []
    for name, s in strats.items():
        w, d = run_monte_carlo(s, scenario, params, args.n_paths, args.seed)
        stats[name] = summary_stats(w, th)
        diags[name] = d
        edges, dens = histogram(w, bins=80)
        hist += [(f"terminal_wealth:{name}", a, b, v, None, None) for a, b, v in zip(edges[:-1], edges[1:], dens)]
    prov = rp.provenance("simulate", _config_dict(args), inputs)
    rp.write_json(args.out, {"mode": "synthetic", "stats": {k: v.to_json() for k, v in stats.items()}, "provenance": prov})
    if args.diagnostics:
        rp.write_diagnostics(args.diagnostics, diags, prov)
    if args.histogram:
        rp.write_histogram(args.histogram, hist, prov)
    print(rp.render_table(stats, f"Synthetic market, {args.n_paths:,} paths"))
    return 0


def cmd_bootstrap(args) -> int:
    data = _resolve_data(args.data)
    m = load_real_market(data)
    scenario = load_scenario(args.scenario)
    strats, ins = _strategies(args.strategy)
    inputs = [data] + ins + ([args.scenario] if isinstance(args.scenario, str) else [])
    th = _thresholds(args)
    stats = {name: run_bootstrap(s, scenario, m.equity_returns, m.bond_returns, args.block_years, args.n_resamples,
                                 args.seed, th) for name, s in strats.items()}
    prov = rp.provenance("bootstrap", _config_dict(args), inputs)
    rp.write_json(args.out, {"mode": "bootstrap", "stats": {k: v.to_json() for k, v in stats.items()}, "provenance": prov})
    print(rp.render_table(stats, f"Block bootstrap, {args.n_resamples:,} resamples, block {args.block_years:g} years"))
    return 0


def cmd_replay(args) -> int:
    data = _resolve_data(args.data)
    m = load_real_market(data)
    scenario = load_scenario(args.scenario)
    strats, ins = _strategies(args.strategy)
    inputs = [data] + ins + ([args.scenario] if isinstance(args.scenario, str) else [])
    start = parse_month(args.start)
    traj = replay_historical(strats, scenario, m.equity_returns, m.bond_returns, start)
    prov = rp.provenance("replay", _config_dict(args), inputs)
    rp.write_replay(args.out, traj, start[0], prov)
    for name, t in traj.items():
        print(f"{name:>12s}: terminal real wealth {t[-1]:,.0f}")
    return 0


def cmd_report(args) -> int:
    """Run the experiment described by ``--config`` and print the comparison tables.

    Config keys: data, params (fitted from data when absent), scenario,
    strategies (name -> spec) or match_constant (solve glide + adaptive
    in-process against constant p), modes (synthetic/bootstrap/replay),
    n_paths, n_resamples, block_years, seed, thresholds, replay_start, out_dir.
    """
    cfg = dict(_read_json(args.config)) if args.config else {}
    cfg_dir = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()

    def rel(p):
        return p if p in (None, "fixture") or os.path.isabs(p) else os.path.join(cfg_dir, p)

    out_dir = rel(cfg.get("out_dir", "."))
    os.makedirs(out_dir, exist_ok=True)
    data = _resolve_data(rel(cfg.get("data")))
    inputs = [args.config, data] if args.config else [data]
    m = load_real_market(data)
    if cfg.get("params"):
        params = load_params(rel(cfg["params"]))
        inputs.append(rel(cfg["params"]))
    else:
        params = with_bond_drift(fit_mle(m.equity_returns).params, m.bond_drift)
    scenario = load_scenario(cfg.get("scenario"))
    seed = int(cfg.get("seed", 2016))
    n_paths = int(cfg.get("n_paths", 1_000_000))
    th = tuple(float(x) for x in cfg.get("thresholds", DEFAULT_THRESHOLDS))
    modes = cfg.get("modes", ["synthetic", "bootstrap"])

    if "strategies" in cfg:
        specs = {k: (rel(v) if isinstance(v, str) and not v.startswith("constant:") else v)
                 for k, v in cfg["strategies"].items()}
        strats, ins = _strategies(specs)
        inputs += ins
    else:
        p_const = float(cfg.get("match_constant", 0.6))
        pm = PeriodMoments.from_params(params, scenario.dt)
        goal = wealth_moments(np.full(scenario.T, p_const), scenario, pm)[0]
        glide = optimize_glide(scenario, pm, goal)
        _, grid = calibrate_target(params, scenario, goal, MCConfig(seed=seed))
        strats = {"Constant proportion": Constant(p_const), "Deterministic glide path": Glide(glide),
                  "Optimal adaptive": Adaptive(grid)}

    prov = rp.provenance("report", cfg, inputs)
    result = {"provenance": prov, "params": params.to_dict()}
    if "synthetic" in modes:
        stats, diags = {}, {}
        for name, s in strats.items():
            w, d = run_monte_carlo(s, scenario, params, n_paths, seed)
            stats[name], diags[name] = summary_stats(w, th), d
        result["synthetic"] = {k: v.to_json() for k, v in stats.items()}
        rp.write_diagnostics(os.path.join(out_dir, "diagnostics.csv"), diags, prov)
        print(rp.render_table(stats, f"Synthetic market ({n_paths:,} paths)"))
    if "bootstrap" in modes:
        nb = int(cfg.get("n_resamples", 10_000))
        by = float(cfg.get("block_years", 2.0))
        stats = {name: run_bootstrap(s, scenario, m.equity_returns, m.bond_returns, by, nb, seed, th)
                 for name, s in strats.items()}
        result["bootstrap"] = {k: v.to_json() for k, v in stats.items()}
        print(rp.render_table(stats, f"Bootstrap resampling ({nb:,} resamples, block {by:g} years)"))
    if "replay" in modes:
        start = parse_month(cfg.get("replay_start", "1985-01"))
        traj = replay_historical(strats, scenario, m.equity_returns, m.bond_returns, start)
        rp.write_replay(os.path.join(out_dir, "replay.csv"), traj, start[0], prov)
        result["replay_terminal"] = {k: float(v[-1]) for k, v in traj.items()}
    rp.write_histogram(os.path.join(out_dir, "histogram.csv"), _returns_histogram(m, params), prov)
    rp.write_json(os.path.join(out_dir, "stats.json"), result)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glidelab", description=__doc__.split("\n\n")[0])
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file whose keys override flags")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "deflate a market CSV into real indexes")
    p.add_argument("--data", default="fixture")
    p.add_argument("--out", default="real.csv")

    p = add("fit", cmd_fit, "fit the jump diffusion and bond drift")
    p.add_argument("--data", default="fixture")
    p.add_argument("--out", default="params.json")
    p.add_argument("--histogram", help="also write standardized-return histogram CSV")

    p = add("solve", cmd_solve, "optimal adaptive policy and optimal glide path")
    p.add_argument("--params", default="params.json")
    p.add_argument("--scenario")
    p.add_argument("--goal-mean", type=float)
    p.add_argument("--target", type=float)
    p.add_argument("--match-constant", type=float)
    p.add_argument("--policy-out", default="policy.json")
    p.add_argument("--glide-out", default="glide.json")
    p.add_argument("--n-paths", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--n-wealth", type=int, default=512)
    p.add_argument("--n-quad", type=int, default=512)
    p.add_argument("--n-controls", type=int, default=201)

    p = add("simulate", cmd_simulate, "Monte Carlo in the synthetic market")
    p.add_argument("--params", default="params.json")
    p.add_argument("--scenario")
    p.add_argument("--strategy", action="append")
    p.add_argument("--n-paths", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=2016)
    p.add_argument("--thresholds", type=float, nargs="+")
    p.add_argument("--out", default="stats.json")
    p.add_argument("--diagnostics", default="diagnostics.csv")
    p.add_argument("--histogram", default="histogram.csv")

    p = add("bootstrap", cmd_bootstrap, "block bootstrap of the historical series")
    p.add_argument("--data", default="fixture")
    p.add_argument("--scenario")
    p.add_argument("--strategy", action="append")
    p.add_argument("--block-years", type=float, default=2.0)
    p.add_argument("--n-resamples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=2016)
    p.add_argument("--thresholds", type=float, nargs="+")
    p.add_argument("--out", default="stats.json")

    p = add("replay", cmd_replay, "single historical pass")
    p.add_argument("--data", default="fixture")
    p.add_argument("--scenario")
    p.add_argument("--strategy", action="append")
    p.add_argument("--start", default="1985-01")
    p.add_argument("--out", default="replay.csv")

    add("report", cmd_report, "run an experiment config and print the tables")
    return ap


def _apply_config(args) -> None:
    if not getattr(args, "config", None) or args.command == "report":
        return
    cfg = _read_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{args.config}: expected a JSON object")
    for k, v in cfg.items():
        key = k.replace("-", "_")
        if not hasattr(args, key):
            raise ConfigError(f"{args.config}: unknown option {k!r} for {args.command}")
        setattr(args, key, v)


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # usage errors are configuration errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_config(args)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"glidelab: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except GlidelabError as exc:
        print(f"glidelab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError, TypeError) as exc:
        code = 2 if isinstance(exc, (OSError, KeyError, TypeError)) else 1
        print(f"glidelab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
