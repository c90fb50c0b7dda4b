"""Hot loops of the solver and simulator, numba and numpy flavours.

``dp_step`` is one backward Bellman step over all wealth nodes;
``adaptive_wealth`` rolls wealth paths forward under a gridded policy.
Both dispatch on ``_accel.USE_NUMBA``; the ``*_numpy`` versions are always
importable so they can be compared against the compiled ones.

Within a node, expectations are summed over quadrature nodes in ascending
order, so a node's result never depends on how nodes are scheduled.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit, prange

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


# -- numba ------------------------------------------------------------------


@njit(cache=True)
def _expect_nb(wgrid, v, slope, g, p, b, R, W, terminal, target):
    n = wgrid.size
    w_max = wgrid[n - 1]
    acc = 0.0
    lost = 0.0
    x0 = g * (p * R[0] + (1.0 - p) * b)
    j = np.searchsorted(wgrid, x0, side="right") - 1
    if j < 0:
        j = 0
    if j > n - 2:
        j = n - 2
    for k in range(R.size):
        x = g * (p * R[k] + (1.0 - p) * b)
        if terminal:
            d = x - target
            acc += W[k] * d * d
            continue
        if x >= w_max:
            acc += W[k] * v[n - 1]
            if x > w_max:
                lost += W[k]
            continue
        while j < n - 2 and wgrid[j + 1] <= x:
            j += 1
        acc += W[k] * (v[j] + slope[j] * (x - wgrid[j]))
    return acc, lost


@njit(cache=True, parallel=True)
def _dp_step_nb(wgrid, v_next, g_nodes, b, R, W, pgrid, refine_iters, active, terminal, target):
    n = wgrid.size
    npc = pgrid.size
    policy = np.zeros(n)
    value = np.zeros(n)
    lost = np.zeros(n)
    slope = np.zeros(n)
    for j in range(n - 1):
        slope[j] = (v_next[j + 1] - v_next[j]) / (wgrid[j + 1] - wgrid[j])
    for i in prange(n):
        if not active[i]:
            continue
        g = g_nodes[i]
        best = np.inf
        jb = 0
        for jp in range(npc):
            val, _ = _expect_nb(wgrid, v_next, slope, g, pgrid[jp], b, R, W, terminal, target)
            if val < best:
                best = val
                jb = jp
        pbest = pgrid[jb]
        if refine_iters > 0 and npc > 1:
            lo = pgrid[max(jb - 1, 0)]
            hi = pgrid[min(jb + 1, npc - 1)]
            c = hi - INVPHI * (hi - lo)
            d = lo + INVPHI * (hi - lo)
            fc, _ = _expect_nb(wgrid, v_next, slope, g, c, b, R, W, terminal, target)
            fd, _ = _expect_nb(wgrid, v_next, slope, g, d, b, R, W, terminal, target)
            for _ in range(refine_iters):
                if fc <= fd:
                    if fc < best:
                        best = fc
                        pbest = c
                    hi = d
                    d = c
                    fd = fc
                    c = hi - INVPHI * (hi - lo)
                    fc, _ = _expect_nb(wgrid, v_next, slope, g, c, b, R, W, terminal, target)
                else:
                    if fd < best:
                        best = fd
                        pbest = d
                    lo = c
                    c = d
                    fc = fd
                    d = lo + INVPHI * (hi - lo)
                    fd, _ = _expect_nb(wgrid, v_next, slope, g, d, b, R, W, terminal, target)
            if fc < best:
                best = fc
                pbest = c
            if fd < best:
                best = fd
                pbest = d
        _, ls = _expect_nb(wgrid, v_next, slope, g, pbest, b, R, W, terminal, target)
        policy[i] = pbest
        value[i] = best
        lost[i] = ls
    return policy, value, lost


@njit(cache=True)
def _adaptive_wealth_nb(w0, contrib, eq_gross, bond_gross, nodes, policy, thresholds, p_out):
    n_paths, T = eq_gross.shape
    nn = nodes.size
    out = np.empty(n_paths)
    for i in range(n_paths):
        w = w0
        for t in range(T):
            if w >= thresholds[t]:
                p = 0.0
            elif w <= nodes[0]:
                p = policy[t, 0]
            elif w >= nodes[nn - 1]:
                p = policy[t, nn - 1]
            else:
                j = np.searchsorted(nodes, w, side="right") - 1
                s = (w - nodes[j]) / (nodes[j + 1] - nodes[j])
                p = policy[t, j] + s * (policy[t, j + 1] - policy[t, j])
            p = min(1.0, max(0.0, p))
            p_out[i, t] = p
            w = (w + contrib[t]) * (p * eq_gross[i, t] + (1.0 - p) * bond_gross[i, t])
        out[i] = w
    return out


# -- numpy ------------------------------------------------------------------


def _expect_np(wgrid, v, g, p, b, R, W, terminal, target):
    """Expectations for node values ``g`` (m,) and controls ``p`` (m, q) -> (m, q)."""
    x = g[:, None, None] * (p[:, :, None] * R[None, None, :] + (1.0 - p[:, :, None]) * b)
    if terminal:
        vals = (x - target) ** 2
        lost = np.zeros(x.shape[:2])
    else:
        vals = np.interp(x, wgrid, v)
        lost = (x > wgrid[-1]) @ W
    return vals @ W, lost


def dp_step_numpy(wgrid, v_next, g_nodes, b, R, W, pgrid, refine_iters, active, terminal=False, target=0.0, chunk=16):
    n = wgrid.size
    policy = np.zeros(n)
    value = np.zeros(n)
    lost = np.zeros(n)
    idx = np.flatnonzero(active)
    npc = pgrid.size
    for s in range(0, idx.size, chunk):
        ii = idx[s:s + chunk]
        g = g_nodes[ii]
        m = ii.size
        vals, _ = _expect_np(wgrid, v_next, g, np.broadcast_to(pgrid, (m, npc)), b, R, W, terminal, target)
        jb = np.argmin(vals, axis=1)  # first minimizer, i.e. smallest p on ties
        best = vals[np.arange(m), jb]
        pbest = pgrid[jb]
        if refine_iters > 0 and npc > 1:
            lo = pgrid[np.maximum(jb - 1, 0)]
            hi = pgrid[np.minimum(jb + 1, npc - 1)]
            c = hi - INVPHI * (hi - lo)
            d = lo + INVPHI * (hi - lo)

            def ev(p):
                return _expect_np(wgrid, v_next, g, p[:, None], b, R, W, terminal, target)[0][:, 0]

            fc, fd = ev(c), ev(d)
            for _ in range(refine_iters):
                left = fc <= fd
                upd = np.where(left, fc, fd) < best
                best = np.where(upd, np.where(left, fc, fd), best)
                pbest = np.where(upd, np.where(left, c, d), pbest)
                hi = np.where(left, d, hi)
                lo = np.where(left, lo, c)
                nc = np.where(left, hi - INVPHI * (hi - lo), d)
                nd = np.where(left, c, lo + INVPHI * (hi - lo))
                nfc_known = np.where(left, np.nan, fd)
                nfd_known = np.where(left, fc, np.nan)
                c, d = nc, nd
                fc = np.where(left, ev(c), nfc_known)
                fd = np.where(left, nfd_known, ev(d))
            for cand, fcand in ((c, fc), (d, fd)):
                upd = fcand < best
                best = np.where(upd, fcand, best)
                pbest = np.where(upd, cand, pbest)
        _, ls = _expect_np(wgrid, v_next, g, pbest[:, None], b, R, W, terminal, target)
        policy[ii] = pbest
        value[ii] = best
        lost[ii] = ls[:, 0]
    return policy, value, lost


def adaptive_wealth_numpy(w0, contrib, eq_gross, bond_gross, nodes, policy, thresholds, p_out):
    n_paths, T = eq_gross.shape
    w = np.full(n_paths, float(w0))
    for t in range(T):
        p = np.clip(np.interp(w, nodes, policy[t]), 0.0, 1.0)
        p[w >= thresholds[t]] = 0.0
        p_out[:, t] = p
        w = (w + contrib[t]) * (p * eq_gross[:, t] + (1.0 - p) * bond_gross[:, t])
    return w


# -- dispatch ---------------------------------------------------------------


def dp_step(wgrid, v_next, g_nodes, b, R, W, pgrid, refine_iters, active, terminal=False, target=0.0):
    if _accel.USE_NUMBA:
        return _dp_step_nb(wgrid, v_next, g_nodes, float(b), R, W, pgrid, int(refine_iters),
                           active, bool(terminal), float(target))
    return dp_step_numpy(wgrid, v_next, g_nodes, b, R, W, pgrid, refine_iters, active, terminal, target)


def adaptive_wealth(w0, contrib, eq_gross, bond_gross, nodes, policy, thresholds):
    """Terminal wealth and the per-date equity fractions used, shape (n_paths, T)."""
    eq_gross = np.ascontiguousarray(eq_gross, dtype=float)
    bond_gross = np.ascontiguousarray(np.broadcast_to(bond_gross, eq_gross.shape), dtype=float)
    p_out = np.empty_like(eq_gross)
    fn = _adaptive_wealth_nb if _accel.USE_NUMBA else adaptive_wealth_numpy
    w = fn(float(w0), np.asarray(contrib, dtype=float), eq_gross, bond_gross,
           np.asarray(nodes, dtype=float), np.ascontiguousarray(policy, dtype=float),
           np.asarray(thresholds, dtype=float), p_out)
    return w, p_out
