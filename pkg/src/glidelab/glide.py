"""Terminal-wealth moments of deterministic glide paths, and the min-variance glide.

Periods are independent, so E[W_T] and E[W_T^2] follow from a two-line
recursion in the per-period moments of G_t = p_t*R + (1 - p_t)*b.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InfeasibleTarget, OptimizationFailed
from .jump_model import KouParams, gross_moments
from .strategy import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodMoments:
    e_mu: float  # E[R]
    e_m2: float  # E[R^2]
    b: float     # bond gross, deterministic

    def __post_init__(self):
        if not (self.e_mu > 0 and self.e_m2 > 0 and self.b > 0):
            raise ValueError("period moments must be positive")
        if self.e_m2 < self.e_mu ** 2 * (1 - 1e-14):
            raise ValueError("E[R^2] < E[R]^2")

    @classmethod
    def from_params(cls, params: KouParams, dt: float = 1.0) -> "PeriodMoments":
        e1, e2 = gross_moments(params, dt)
        return cls(e1, e2, math.exp(params.r * dt))


def _forward(p: np.ndarray, w0: float, c: np.ndarray, pm: PeriodMoments):
    T = p.size
    m1 = np.empty(T + 1)
    m2 = np.empty(T + 1)
    m1[0], m2[0] = w0, w0 * w0
    b = pm.b
    A = p * pm.e_mu + (1 - p) * b
    B = p * p * pm.e_m2 + 2 * p * (1 - p) * pm.e_mu * b + (1 - p) ** 2 * b * b
    for t in range(T):
        m1[t + 1] = (m1[t] + c[t]) * A[t]
        m2[t + 1] = (m2[t] + 2 * c[t] * m1[t] + c[t] * c[t]) * B[t]
    return m1, m2, A, B


def wealth_moments(glide: Sequence[float], scenario: Scenario, pm: PeriodMoments) -> Tuple[float, float]:
    """(E[W_T], E[W_T^2]) for a deterministic glide path."""
    p = np.asarray(glide, dtype=float)
    if p.size != scenario.T:
        raise ValueError(f"glide has {p.size} entries, horizon is {scenario.T}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("glide fractions must lie in [0, 1]")
    m1, m2, _, _ = _forward(p, scenario.W0, scenario.contributions, pm)
    return float(m1[-1]), float(m2[-1])


def wealth_std(glide, scenario: Scenario, pm: PeriodMoments) -> float:
    m1, m2 = wealth_moments(glide, scenario, pm)
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def moment_gradients(p: np.ndarray, w0: float, c: np.ndarray, pm: PeriodMoments):
    """m1_T, m2_T and their gradients in p, by reverse accumulation through the recursion."""
    m1, m2, A, B = _forward(p, w0, c, pm)
    b = pm.b
    dA = pm.e_mu - b
    dB = 2 * p * pm.e_m2 + 2 * (1 - 2 * p) * pm.e_mu * b - 2 * (1 - p) * b * b
    T = p.size
    out = []
    for seed1, seed2 in ((1.0, 0.0), (0.0, 1.0)):
        a1, a2 = seed1, seed2
        g = np.empty(T)
        for t in range(T - 1, -1, -1):
            g[t] = a1 * (m1[t] + c[t]) * dA + a2 * (m2[t] + 2 * c[t] * m1[t] + c[t] * c[t]) * dB[t]
            a1, a2 = a1 * A[t] + a2 * 2 * c[t] * B[t], a2 * B[t]
        out.append(g)
    return m1[-1], m2[-1], out[0], out[1]


# -- optimizer ----------------------------------------------------------------


@dataclass
class _Problem:
    """Variance and mean constraint with wealth scaled by the target mean."""

    w0: float
    c: np.ndarray
    pm: PeriodMoments

    def eval(self, p):
        m1, m2, g1, g2 = moment_gradients(p, self.w0, self.c, self.pm)
        f = m2 - m1 * m1
        gf = g2 - 2 * m1 * g1
        return f, gf, m1 - 1.0, g1


def _bisect_feasible(family, prob: _Problem, lo=0.0, hi=1.0, iters=200):
    """Find theta with mean(family(theta)) = 1; mean is nondecreasing in theta."""
    def h(th):
        return prob.eval(family(th))[2]

    hlo, hhi = h(lo), h(hi)
    if hlo > 0 or hhi < 0:
        return None
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return family(0.5 * (lo + hi))


def glide_starts(T: int, prob: _Problem) -> List[np.ndarray]:
    """Feasible starts: constant, decreasing ramp (equity then bond), increasing ramp."""
    s = np.arange(T) / max(T - 1, 1)
    fams = [
        lambda th: np.full(T, th),
        lambda th: np.clip(2 * th - s, 0.0, 1.0),
        lambda th: np.clip(2 * th - (1 - s), 0.0, 1.0),
    ]
    out = []
    for fam in fams:
        x = _bisect_feasible(fam, prob)
        if x is not None:
            out.append(x)
    return out


def _proj(x):
    return np.clip(x, 0.0, 1.0)


def _pg_minimize(fun, x, tol, max_iter):
    """Projected gradient with Barzilai-Borwein steps and Armijo backtracking on the box."""
    fx, gx = fun(x)
    alpha = 1.0 / max(np.abs(gx).max(), 1e-12)
    for it in range(max_iter):
        pgn = np.abs(_proj(x - gx) - x).max()
        if pgn <= tol:
            return x, fx, gx, it, pgn
        step = alpha
        while True:
            xn = _proj(x - step * gx)
            d = xn - x
            fn, gn = fun(xn)
            if fn <= fx + 1e-4 * np.dot(gx, d) or step < 1e-20:
                break
            step *= 0.5
        s, y = xn - x, gn - gx
        sy = np.dot(s, y)
        alpha = np.dot(s, s) / sy if sy > 1e-300 else 1.0 / max(np.abs(gn).max(), 1e-12)
        alpha = min(max(alpha, 1e-12), 1e12)
        if not np.any(d):
            return xn, fn, gn, it, np.abs(_proj(xn - gn) - xn).max()
        x, fx, gx = xn, fn, gn
    return x, fx, gx, max_iter, np.abs(_proj(x - gx) - x).max()


def _augmented_lagrangian(prob: _Problem, x0, grad_tol=1e-8, cons_tol=1e-11, max_inner=10_000, max_outer=60):
    lam, rho = 0.0, 10.0
    x = x0.copy()
    h_prev = abs(prob.eval(x)[2])
    for outer in range(max_outer):
        def L(z, lam=lam, rho=rho):
            f, gf, h, gh = prob.eval(z)
            return f + lam * h + 0.5 * rho * h * h, gf + (lam + rho * h) * gh

        x, _, _, n_it, pgn = _pg_minimize(L, x, grad_tol, max_inner)
        f, gf, h, gh = prob.eval(x)
        lam += rho * h
        if abs(h) <= cons_tol and pgn <= grad_tol:
            return x, f, h, outer
        if abs(h) > 0.25 * h_prev:
            rho *= 10.0
        h_prev = abs(h)
    return x, f, h, max_outer


def optimize_glide(scenario: Scenario, pm: PeriodMoments, target_mean: float, rel_tol: float = 1e-6) -> np.ndarray:
    """Glide path minimizing std[W_T] subject to E[W_T] = target_mean, 0 <= p_t <= 1."""
    T = scenario.T
    c = scenario.contributions
    lo_mean = wealth_moments(np.zeros(T), scenario, pm)[0]
    hi_mean = wealth_moments(np.ones(T), scenario, pm)[0]
    lo_mean, hi_mean = min(lo_mean, hi_mean), max(lo_mean, hi_mean)
    if not (lo_mean * (1 - 1e-12) <= target_mean <= hi_mean * (1 + 1e-12)):
        raise InfeasibleTarget(
            f"target mean {target_mean:.6g} outside achievable range [{lo_mean:.6g}, {hi_mean:.6g}]"
        )
    prob = _Problem(scenario.W0 / target_mean, c / target_mean, pm)
    starts = glide_starts(T, prob)
    if not starts:
        raise InfeasibleTarget("no feasible start found")

    best = None
    for k, x0 in enumerate(starts):
        x, f, h, n_outer = _augmented_lagrangian(prob, x0)
        log.debug("glide start %d: var=%.12g h=%.3g outer=%d", k, f, h, n_outer)
        if abs(h) > rel_tol:
            continue
        if best is None or f < best[0] - 1e-12 * abs(best[0]):
            best = (f, x)
    f_const = prob.eval(starts[0])[0]
    if best is None:
        raise OptimizationFailed("augmented Lagrangian did not reach the mean constraint from any start")
    if best[0] > f_const:
        best = (f_const, starts[0])
    return best[1]
