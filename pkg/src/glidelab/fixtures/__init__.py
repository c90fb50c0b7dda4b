"""Bundled synthetic market file.

``synthetic_market.csv`` stands in for the proprietary monthly index data
(1925-12 levels, returns 1926-01..2015-12). It is produced by
:func:`generate` with ``SEED``; rerun ``python -m glidelab.fixtures`` to
rebuild it byte-for-byte.

Real equity log returns follow a Kou jump diffusion (``GENERATOR``); monthly
inflation and the real bill return are independent AR(1) processes. Nominal
series are real series re-inflated with the simulated CPI.

Both real return draws are shifted so their sample means equal the
generator's exact monthly log means. Ninety years of draws otherwise miss
the equity drift by about 0.02/yr per standard error, and the fixture is meant
to look like the market the generator describes, not like one unlucky
history of it.
"""
import os

import numpy as np

from ..jump_model import KouParams, log_return_moments, sample_log_returns
from ..market_data import format_month, month_add

SEED = 19262015
START = (1925, 12)
N_RETURNS = 1080

GENERATOR = KouParams(mu=0.0874, sigma=0.1452, lam=0.3237, p_up=0.2230, eta1=4.3625, eta2=5.5049, r=0.00623)

# monthly log inflation and real bill return: mean, AR coefficient, shock sd
INFLATION = (0.0025, 0.6, 0.003)
REAL_BILL = (0.00623 / 12, 0.5, 0.002)

FIXTURE_PATH = os.path.join(os.path.dirname(__file__), "synthetic_market.csv")


def _ar1(gen, n, mean, phi, sd):
    out = np.empty(n)
    x = 0.0
    for i, e in enumerate(gen.standard_normal(n)):
        x = phi * x + sd * e
        out[i] = mean + x
    return out


def generate(seed: int = SEED, n: int = N_RETURNS):
    """Return (months, equity_nominal, bill_nominal, cpi) level arrays of length n + 1."""
    gen = np.random.default_rng(seed)
    eq_real = sample_log_returns(GENERATOR, 1.0 / 12.0, n, gen)
    infl = _ar1(gen, n, *INFLATION)
    bill_real = _ar1(gen, n, *REAL_BILL)
    eq_real += log_return_moments(GENERATOR, 1.0 / 12.0)[0] - eq_real.mean()
    bill_real += REAL_BILL[0] - bill_real.mean()
    cpi = 10.0 * np.exp(np.concatenate([[0.0], np.cumsum(infl)]))
    eq = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(eq_real + infl)]))
    bill = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(bill_real + infl)]))
    months = [month_add(START, i) for i in range(n + 1)]
    return months, eq, bill, cpi


def write_csv(path: str = FIXTURE_PATH, seed: int = SEED) -> str:
    months, eq, bill, cpi = generate(seed)
    with open(path, "w", newline="") as fh:
        fh.write("date,equity_nominal,bill_nominal,cpi\n")
        for m, e, b, c in zip(months, eq, bill, cpi):
            fh.write(f"{format_month(m)},{e:.10f},{b:.10f},{c:.10f}\n")
    return path
