"""Time the numba and numpy kernels on a production-sized problem.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each backend runs in its own process because the switch is read at import.
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from glidelab import _accel, kernels
from glidelab.adaptive import GridConfig, bond_thresholds, wealth_grid
from glidelab.jump_model import KouParams, period_return_quadrature
from glidelab.strategy import Scenario

repeat = int(sys.argv[1])
p = KouParams(0.0874, 0.1452, 0.3237, 0.2230, 4.3625, 5.5049, r=0.00623)
s = Scenario()
cfg = GridConfig()
target = 1.1e6
q = period_return_quadrature(p, 1.0, cfg.n_quad)
wg = wealth_grid(s, target, cfg)
b = float(np.exp(p.r))
thr = bond_thresholds(s, target, b)
v = (wg - target) ** 2
pgrid = np.linspace(0, 1, cfg.n_controls)
active = wg < thr[15]

def step():
    return kernels.dp_step(wg, v, wg + s.c, b, q.gross_returns, q.weights, pgrid, cfg.refine_iters, active)

rng = np.random.default_rng(0)
eq = np.exp(rng.normal(0.07, 0.17, (200_000, s.T)))
policy = np.tile(np.clip(1.2 - wg / target, 0, 1), (s.T, 1))

def roll():
    return kernels.adaptive_wealth(s.W0, s.contributions, eq, b, wg, policy, thr)

step(); roll()  # compile / warm caches
out = {"backend": _accel.backend()}
for name, fn in (("dp_step (512 nodes x 201 controls x 512 quad)", step), ("adaptive_wealth (200k paths x 30)", roll)):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); ts.append(time.perf_counter() - t0)
    out[name] = min(ts)
print(json.dumps(out))
"""


def run(env_extra, repeat):
    env = dict(os.environ)
    env.update(env_extra)
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    nb = run({"GLIDELAB_DISABLE_NUMBA": "0"}, args.repeat)
    npy = run({"GLIDELAB_DISABLE_NUMBA": "1"}, args.repeat)
    print(f"{'kernel':<50s} {nb['backend']:>10s} {npy['backend']:>10s} {'speedup':>8s}")
    for k in nb:
        if k == "backend":
            continue
        print(f"{k:<50s} {nb[k]:>9.3f}s {npy[k]:>9.3f}s {npy[k] / nb[k]:>7.1f}x")


if __name__ == "__main__":
    main()
