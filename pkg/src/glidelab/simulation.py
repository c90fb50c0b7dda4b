"""Strategy evaluation: synthetic-market Monte Carlo, block bootstrap, historical replay."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from . import kernels
from . import rng as _rng
from .adaptive import lookup_thresholds
from .errors import BlockTooLong, EmptySample, WindowOutOfRange
from .jump_model import KouParams, sample_log_returns
from .market_data import Month, ReturnSeries, format_month, month_add, month_index
from .strategy import Adaptive, Constant, Glide, Scenario, Strategy

DEFAULT_THRESHOLDS = (500_000.0, 650_000.0, 800_000.0)


@dataclass(frozen=True)
class OutcomeStats:
    mean: float
    std: float
    shortfall_probs: Dict[float, float]
    n_paths: int
    mc_standard_error_mean: float
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "shortfall_probs": {repr(float(k)): v for k, v in self.shortfall_probs.items()},
            "n_paths": self.n_paths,
            "mc_standard_error_mean": self.mc_standard_error_mean,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class PathDiagnostics:
    mean_p: np.ndarray
    std_p: np.ndarray


def summary_stats(sample, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> OutcomeStats:
    """Mean, sample std (n-1), P[W_T < threshold] and the standard error of the mean.

    A single observation gets std 0 and ``degenerate=True``.
    """
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise EmptySample("empty sample")
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    probs = {float(k): float(np.count_nonzero(x < k)) / n for k in sorted(thresholds)}
    return OutcomeStats(mean, std, probs, n, std / math.sqrt(n), degenerate=n == 1)


def _fractions(strategy: Strategy, T: int) -> np.ndarray:
    if isinstance(strategy, (Constant, Glide)):
        return strategy.fractions(T)
    raise TypeError(f"not a deterministic strategy: {strategy!r}")


def evaluate_paths(strategy: Strategy, scenario: Scenario, eq_gross: np.ndarray, bond_gross) -> Tuple[np.ndarray, np.ndarray]:
    """Roll wealth forward along given annual gross returns, shape (n_paths, T).

    Returns terminal wealth and the equity fraction used at each date.
    """
    eq_gross = np.asarray(eq_gross, dtype=float)
    n, T = eq_gross.shape
    if T != scenario.T:
        raise ValueError(f"return paths have {T} periods, horizon is {scenario.T}")
    c = scenario.contributions
    if isinstance(strategy, Adaptive):
        g = strategy.policy
        if g.T != T:
            raise ValueError(f"policy covers {g.T} dates, horizon is {T}")
        return kernels.adaptive_wealth(scenario.W0, c, eq_gross, bond_gross, g.wealth_nodes, g.policy,
                                       lookup_thresholds(g))
    p = _fractions(strategy, T)
    bond = np.broadcast_to(bond_gross, eq_gross.shape)
    w = np.full(n, float(scenario.W0))
    for t in range(T):
        w = (w + c[t]) * (p[t] * eq_gross[:, t] + (1.0 - p[t]) * bond[:, t])
    return w, np.broadcast_to(p, (n, T))


class _Moments:
    """Per-date sums of p and p^2, accumulated chunk by chunk in a fixed order."""

    def __init__(self, T):
        self.s1 = np.zeros(T)
        self.s2 = np.zeros(T)
        self.n = 0

    def add(self, p):
        self.s1 += p.sum(axis=0)
        self.s2 += (p * p).sum(axis=0)
        self.n += p.shape[0]

    def result(self) -> PathDiagnostics:
        m = self.s1 / self.n
        v = np.maximum(self.s2 / self.n - m * m, 0.0)
        return PathDiagnostics(np.clip(m, 0.0, 1.0), np.sqrt(v))


def market_paths(params: KouParams, scenario: Scenario, n_paths: int, seed: int):
    """Yield (start, stop, equity gross returns) per chunk; shape (chunk, T)."""
    for k, lo, hi in _rng.chunks(n_paths):
        gen = _rng.stream(seed, _rng.MARKET, k)
        yield lo, hi, np.exp(sample_log_returns(params, scenario.dt, (hi - lo, scenario.T), gen))


def run_monte_carlo(strategy: Strategy, scenario: Scenario, params: KouParams, n_paths: int, seed: int) -> Tuple[np.ndarray, PathDiagnostics]:
    """Terminal wealth on ``n_paths`` synthetic-market paths, plus equity-fraction diagnostics."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    params.validate()
    b = math.exp(params.r * scenario.dt)
    out = np.empty(n_paths)
    acc = _Moments(scenario.T)
    for lo, hi, eq in market_paths(params, scenario, n_paths, seed):
        w, p = evaluate_paths(strategy, scenario, eq, b)
        out[lo:hi] = w
        acc.add(p)
    return out, acc.result()


# -- bootstrap --------------------------------------------------------------


def _block_months(block_years: float) -> int:
    b = int(round(12 * block_years))
    if block_years <= 0 or b < 1:
        raise ValueError("block size must be positive")
    return b


def block_indices(n_data: int, block_years: float, horizon_years: float, n_resamples: int, seed: int) -> np.ndarray:
    """Month indices of ``n_resamples`` circular block-bootstrap paths, shape (n, horizon months).

    Each path concatenates ceil(H/b) blocks of b consecutive months with
    uniformly drawn start months, wrapping past the end of the data; the
    last block is cut to the horizon.
    """
    b = _block_months(block_years)
    H = int(round(12 * horizon_years))
    if b > n_data:
        raise BlockTooLong(f"block of {b} months exceeds the {n_data} months of data")
    k = -(-H // b)
    out = np.empty((n_resamples, H), dtype=np.int64)
    offs = np.arange(b)
    for c, lo, hi in _rng.chunks(n_resamples):
        gen = _rng.stream(seed, _rng.BOOTSTRAP, c)
        starts = gen.integers(0, n_data, size=(hi - lo, k))
        idx = (starts[:, :, None] + offs) % n_data
        out[lo:hi] = idx.reshape(hi - lo, k * b)[:, :H]
    return out


def _paired(equity: ReturnSeries, bond: ReturnSeries) -> Tuple[np.ndarray, np.ndarray]:
    if len(equity) != len(bond) or equity.start_month != bond.start_month:
        raise ValueError("equity and bond returns must cover the same months")
    return equity.log_returns, bond.log_returns


def block_resample(equity: ReturnSeries, bond: ReturnSeries, block_years: float, horizon_years: float, seed: int):
    """One paired resampled path: (equity log returns, bond log returns, source month indices)."""
    e, b = _paired(equity, bond)
    idx = block_indices(e.size, block_years, horizon_years, 1, seed)[0]
    return e[idx], b[idx], idx


def _annual_gross(monthly_log: np.ndarray, T: int) -> np.ndarray:
    n = monthly_log.shape[0]
    return np.exp(monthly_log.reshape(n, T, 12).sum(axis=2))


def run_bootstrap(strategy: Strategy, scenario: Scenario, equity: ReturnSeries, bond: ReturnSeries,
                  block_years: float = 2.0, n_resamples: int = 10_000, seed: int = 0,
                  thresholds: Sequence[float] = DEFAULT_THRESHOLDS, return_sample: bool = False):
    """Evaluate a frozen strategy on block-bootstrapped historical paths.

    Within each year the 12 resampled monthly returns of each asset compound;
    injection and rebalancing happen once a year as in the synthetic market.
    """
    e, b = _paired(equity, bond)
    T = scenario.T
    out = np.empty(n_resamples)
    idx_all = block_indices(e.size, block_years, T, n_resamples, seed)
    for c, lo, hi in _rng.chunks(n_resamples):
        idx = idx_all[lo:hi]
        w, _ = evaluate_paths(strategy, scenario, _annual_gross(e[idx], T), _annual_gross(b[idx], T))
        out[lo:hi] = w
    stats = summary_stats(out, thresholds)
    return (stats, out) if return_sample else stats


# -- historical replay ------------------------------------------------------


def replay_historical(strategies: Mapping[str, Strategy], scenario: Scenario, equity: ReturnSeries, bond: ReturnSeries,
                      start: Month = (1985, 1)) -> Dict[str, np.ndarray]:
    """Single pass over the historical window starting at ``start``.

    Contributions go in each January (with the rebalance); the returned
    arrays hold wealth at t = 0 (before the first injection) and at each
    year end, length T + 1.
    """
    e, b = _paired(equity, bond)
    T = scenario.T
    i0 = month_index(start) - month_index(equity.start_month)
    if i0 < 0 or i0 + 12 * T > e.size:
        last = month_add(equity.start_month, e.size - 1)
        raise WindowOutOfRange(
            f"{T}-year window from {format_month(start)} not covered by data "
            f"{format_month(equity.start_month)}..{format_month(last)}"
        )
    eq = _annual_gross(e[None, i0:i0 + 12 * T], T)
    bd = _annual_gross(b[None, i0:i0 + 12 * T], T)
    c = scenario.contributions
    out = {}
    for name, strat in strategies.items():
        traj = np.empty(T + 1)
        traj[0] = scenario.W0
        w = np.array([float(scenario.W0)])
        for t in range(T):
            if isinstance(strat, Adaptive):
                from .adaptive import policy_lookup

                p = policy_lookup(strat.policy, w[0], t)
            else:
                p = _fractions(strat, T)[t]
            w = (w + c[t]) * (p * eq[:, t] + (1 - p) * bd[:, t])
            traj[t + 1] = w[0]
        out[name] = traj
    return out


# -- histogram data ---------------------------------------------------------


def histogram(sample, bins: int = 60, range_=None) -> Tuple[np.ndarray, np.ndarray]:
    dens, edges = np.histogram(np.asarray(sample, dtype=float), bins=bins, range=range_, density=True)
    return edges, dens
