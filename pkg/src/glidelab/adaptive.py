"""Optimal adaptive allocation p(W, t) for the quadratic target objective.

Backward induction at the annual rebalance dates:

    V_T(w) = (w - W*)^2
    V_t(w) = min_{0<=p<=1} E[ V_{t+1}((w + c_t)(p R + (1 - p) b)) ]

with R from the discretized one-year jump-diffusion law and V_{t+1}
interpolated linearly in wealth.

Wherever investing everything in the bond from t on already reaches W*, any
equity exposure raises both the mean overshoot and the variance, so p = 0
and V_t(w) = (F_t(w) - W*)^2 exactly. Those nodes skip the minimization.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import GridTooSmall, InfeasibleGoal, NoConvergence, UnknownTime
from .jump_model import KouParams, period_return_quadrature
from .strategy import Scenario

log = logging.getLogger(__name__)

FORMAT = "glidelab.policy/1"


@dataclass(frozen=True)
class GridConfig:
    n_wealth: int = 512
    w_max_factor: float = 10.0
    n_controls: int = 201
    refine_iters: int = 24
    n_quad: int = 512
    max_lost_mass: float = 1e-5


@dataclass(frozen=True, eq=False)
class PolicyGrid:
    times: np.ndarray
    wealth_nodes: np.ndarray
    policy: np.ndarray   # (T, n_wealth)
    value: np.ndarray    # (T + 1, n_wealth); last row is the terminal penalty
    target: float
    thresholds: np.ndarray  # wealth at/above which bond-only reaches the target, per date
    params_digest: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.times.size

    def value_at(self, w: float, t: int = 0) -> float:
        return float(np.interp(w, self.wealth_nodes, self.value[t]))


def wealth_grid(scenario: Scenario, target: float, cfg: GridConfig) -> np.ndarray:
    """Node 0, then log-spaced nodes from W0/100 up to w_max.

    The log node nearest W0 is moved onto W0 so value_0(W0) needs no interpolation.
    """
    base = scenario.W0 if scenario.W0 > 0 else max(scenario.c, 1.0)
    w_max = cfg.w_max_factor * target
    g = np.concatenate([[0.0], np.geomspace(base / 100.0, w_max, cfg.n_wealth - 1)])
    if 0 < scenario.W0 < w_max:
        k = 1 + int(np.argmin(np.abs(np.log(g[1:] / scenario.W0))))
        g[k] = scenario.W0
    return g


def bond_thresholds(scenario: Scenario, target: float, b: float) -> np.ndarray:
    """thr[t]: smallest pre-injection wealth at t from which the all-bond route ends at ``target``."""
    c = scenario.contributions
    T = scenario.T
    thr = np.empty(T)
    need = target  # wealth needed at t+1 (post-accrual, pre-injection)
    for t in range(T - 1, -1, -1):
        thr[t] = need / b - c[t]
        need = thr[t]
    return thr


def bond_continuation(scenario: Scenario, w: np.ndarray, t: int, b: float) -> np.ndarray:
    """Terminal wealth from wealth ``w`` at date t (pre-injection) under all-bond."""
    c = scenario.contributions
    out = np.asarray(w, dtype=float).copy()
    for s in range(t, scenario.T):
        out = (out + c[s]) * b
    return out


def solve_policy(params: KouParams, scenario: Scenario, W_star: float, grid_config: Optional[GridConfig] = None) -> PolicyGrid:
    cfg = grid_config or GridConfig()
    params.validate()
    if not W_star > 0:
        raise ValueError("target must be positive")
    if cfg.w_max_factor < 8.0:
        raise ValueError("w_max must be at least 8 x target")
    dt = scenario.dt
    quad = period_return_quadrature(params, dt, cfg.n_quad)
    R = np.ascontiguousarray(quad.gross_returns)
    Wq = np.ascontiguousarray(quad.weights)
    b = math.exp(params.r * dt)
    wg = wealth_grid(scenario, W_star, cfg)
    pgrid = np.linspace(0.0, 1.0, cfg.n_controls)
    T = scenario.T
    c = scenario.contributions
    thr = bond_thresholds(scenario, W_star, b)
    thr_eff = thr - 1e-10 * abs(W_star)  # same tolerance as policy lookups

    value = np.empty((T + 1, wg.size))
    policy = np.zeros((T, wg.size))
    value[T] = (wg - W_star) ** 2
    worst_lost = 0.0
    for t in range(T - 1, -1, -1):
        over = wg >= thr_eff[t]
        active = ~over
        pol, val, lost = kernels.dp_step(
            wg, value[t + 1], wg + c[t], b, R, Wq, pgrid, cfg.refine_iters,
            active, terminal=(t == T - 1), target=W_star,
        )
        val[over] = (bond_continuation(scenario, wg[over], t, b) - W_star) ** 2
        pol[over] = 0.0
        policy[t] = pol
        value[t] = val
        if active.any():
            lm = float(lost[active].max())
            worst_lost = max(worst_lost, lm)
            if lm > cfg.max_lost_mass:
                raise GridTooSmall(f"t={t}: {lm:.3g} probability mass mapped beyond w_max={wg[-1]:.6g}")
    log.debug("solve_policy W*=%.6g value0(W0)=%.6g lost=%.3g", W_star, np.interp(scenario.W0, wg, value[0]), worst_lost)
    return PolicyGrid(
        times=np.arange(T), wealth_nodes=wg, policy=policy, value=value, target=float(W_star),
        thresholds=thr, params_digest=params.digest(),
        meta={"scenario": scenario.to_dict(), "grid": cfg.__dict__.copy(), "lost_mass": worst_lost,
              "bond_gross": b, "params": params.to_dict()},
    )


def policy_lookup(grid: PolicyGrid, w, t: int):
    """Equity fraction at wealth ``w`` (scalar or array) and date ``t``."""
    t = int(t)
    if t < 0 or t >= grid.T:
        raise UnknownTime(f"no policy stored for t={t}")
    w = np.asarray(w, dtype=float)
    p = np.clip(np.interp(w, grid.wealth_nodes, grid.policy[t]), 0.0, 1.0)
    p = np.where(w >= lookup_thresholds(grid)[t], 0.0, p)
    return p if p.ndim else float(p)


def lookup_thresholds(grid: PolicyGrid) -> np.ndarray:
    # absorb rounding when a path rides exactly on the all-bond trajectory
    return grid.thresholds - 1e-10 * abs(grid.target)


# -- serialization ----------------------------------------------------------


def policy_to_json(grid: PolicyGrid) -> dict:
    return {
        "format": FORMAT,
        "target": grid.target,
        "times": [int(t) for t in grid.times],
        "wealth_nodes": grid.wealth_nodes.tolist(),
        "thresholds": grid.thresholds.tolist(),
        "policy": grid.policy.tolist(),
        "value": grid.value.tolist(),
        "params_sha256": grid.params_digest,
        "meta": grid.meta,
    }


def policy_from_json(d: dict) -> PolicyGrid:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a policy file (format={d.get('format')!r})")
    return PolicyGrid(
        times=np.asarray(d["times"], dtype=int), wealth_nodes=np.asarray(d["wealth_nodes"], dtype=float),
        policy=np.asarray(d["policy"], dtype=float), value=np.asarray(d["value"], dtype=float),
        target=float(d["target"]), thresholds=np.asarray(d["thresholds"], dtype=float),
        params_digest=d.get("params_sha256", ""), meta=d.get("meta", {}),
    )


def save_policy(grid: PolicyGrid, path: str, extra: Optional[dict] = None) -> None:
    obj = policy_to_json(grid)
    if extra:
        obj["provenance"] = extra
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_policy(path: str) -> PolicyGrid:
    with open(path) as fh:
        return policy_from_json(json.load(fh))


# -- target calibration -----------------------------------------------------


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 200_000
    seed: int = 12345
    rel_tol: float = 0.0025
    se_mult: float = 2.0
    max_iter: int = 50


def _mc_mean(params, scenario, grid, mc: MCConfig) -> Tuple[float, float]:
    from .simulation import run_monte_carlo
    from .strategy import Adaptive

    w, _ = run_monte_carlo(Adaptive(grid), scenario, params, mc.n_paths, mc.seed)
    return float(np.mean(w)), float(np.std(w, ddof=1) / math.sqrt(w.size))


def calibrate_target(params: KouParams, scenario: Scenario, goal_mean: float, mc_config: Optional[MCConfig] = None,
                     grid_config: Optional[GridConfig] = None) -> Tuple[float, PolicyGrid]:
    """Find W* so that E[W_T] under the optimal policy for W* equals ``goal_mean``.

    The map W* -> E[W_T] is increasing; it is bracketed upward from the
    all-bond wealth F and then solved by secant steps safeguarded by the
    bracket (a fixed MC seed makes the map deterministic).
    """
    mc = mc_config or MCConfig()
    b = math.exp(params.r * scenario.dt)
    F = scenario.bond_terminal_wealth(b)
    if goal_mean < F * (1 - 1e-12):
        raise InfeasibleGoal(f"goal {goal_mean:.6g} below all-bond terminal wealth {F:.6g}")

    def tol(se):
        return max(mc.rel_tol * goal_mean, mc.se_mult * se)

    cache = {}

    def evaluate(ws):
        grid = solve_policy(params, scenario, ws, grid_config)
        m, se = _mc_mean(params, scenario, grid, mc)
        cache[ws] = (m, se, grid)
        log.info("calibrate: W*=%.2f -> E[W_T]=%.2f (goal %.2f)", ws, m, goal_mean)
        return m - goal_mean, se, grid

    lo = F
    f_lo, se, grid = evaluate(lo)
    if abs(f_lo) <= tol(se):
        return lo, grid
    hi = max(goal_mean, F) * 1.25
    f_hi, se, grid = evaluate(hi)
    n = 2
    while f_hi < 0:
        if abs(f_hi) <= tol(se):
            return hi, grid
        lo, f_lo = hi, f_hi
        hi *= 1.5
        f_hi, se, grid = evaluate(hi)
        n += 1
        if n >= mc.max_iter:
            raise NoConvergence("could not bracket the target")
    if abs(f_hi) <= tol(se):
        return hi, grid

    a, fa, bb, fb = lo, f_lo, hi, f_hi
    x_prev, f_prev = a, fa
    x_cur, f_cur = bb, fb
    while n < mc.max_iter:
        x = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev) if f_cur != f_prev else 0.5 * (a + bb)
        if not (min(a, bb) < x < max(a, bb)):
            x = 0.5 * (a + bb)
        fx, se, grid = evaluate(x)
        n += 1
        if abs(fx) <= tol(se):
            return x, grid
        if fx < 0:
            a, fa = x, fx
        else:
            bb, fb = x, fx
        x_prev, f_prev, x_cur, f_cur = x_cur, f_cur, x, fx
    raise NoConvergence(f"no convergence in {mc.max_iter} evaluations")
