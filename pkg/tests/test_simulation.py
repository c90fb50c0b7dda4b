import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glidelab.errors import BlockTooLong, EmptySample, WindowOutOfRange
from glidelab.glide import PeriodMoments, wealth_moments
from glidelab.market_data import ReturnSeries
from glidelab.simulation import (
    block_indices,
    block_resample,
    replay_historical,
    run_bootstrap,
    run_monte_carlo,
    summary_stats,
)
from glidelab.strategy import Constant, Glide, Scenario


def test_summary_hand_countable():
    s = summary_stats([400e3, 600e3, 900e3], [500e3, 650e3, 800e3])
    assert s.shortfall_probs == {500e3: pytest.approx(1 / 3), 650e3: pytest.approx(2 / 3), 800e3: pytest.approx(2 / 3)}
    assert s.mean == pytest.approx(633_333.333333, rel=1e-9)
    assert s.std == pytest.approx(np.std([400e3, 600e3, 900e3], ddof=1))


def test_summary_degenerate():
    s = summary_stats([5.0])
    assert s.std == 0 and s.degenerate
    with pytest.raises(EmptySample):
        summary_stats([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 2e6), min_size=1, max_size=200), st.lists(st.floats(0, 2e6), min_size=1, max_size=5))
def test_shortfall_monotone(sample, th):
    probs = summary_stats(sample, th).shortfall_probs
    vals = [probs[k] for k in sorted(probs)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_all_bond_monte_carlo(reference_params):
    s = Scenario()
    w, diag = run_monte_carlo(Constant(0.0), s, reference_params, 5000, 1)
    F = s.bond_terminal_wealth(math.exp(reference_params.r))
    assert np.allclose(w, F, rtol=1e-13)
    assert summary_stats(w).std == pytest.approx(0.0, abs=1e-6)
    assert np.all(diag.mean_p == 0)


@pytest.mark.slow
def test_constant_mean_matches_recursion(reference_params):
    s = Scenario()
    w, diag = run_monte_carlo(Constant(0.6), s, reference_params, 1_000_000, 21)
    m1, _ = wealth_moments(np.full(30, 0.6), s, PeriodMoments.from_params(reference_params))
    assert abs(w.mean() - m1) < 3 * w.std() / math.sqrt(w.size)
    assert np.allclose(diag.mean_p, 0.6) and np.allclose(diag.std_p, 0.0, atol=1e-6)


def test_monte_carlo_seed_and_chunking(reference_params):
    s = Scenario(T=5)
    a, _ = run_monte_carlo(Constant(0.5), s, reference_params, 40_000, 3)
    b, _ = run_monte_carlo(Constant(0.5), s, reference_params, 40_000, 3)
    c, _ = run_monte_carlo(Constant(0.5), s, reference_params, 20_000, 3)
    assert np.array_equal(a, b)
    assert np.array_equal(a[:16384], c[:16384])  # a path never depends on how many others are drawn


def test_block_single():
    idx = block_indices(100, 2.0, 2.0, 50, 0)
    assert idx.shape == (50, 24)
    assert np.all(np.diff(idx, axis=1) % 100 == 1)


def test_block_counts():
    idx = block_indices(1080, 2.0, 30.0, 10, 0)
    assert idx.shape == (10, 360)
    starts = idx[:, ::24]
    assert starts.shape[1] == 15


@settings(max_examples=30, deadline=None)
@given(st.integers(30, 300), st.sampled_from([0.5, 1.0, 2.0]), st.integers(0, 10_000))
def test_blocks_are_contiguous_runs(n, by, seed):
    b = int(12 * by)
    idx = block_indices(n, by, 10.0, 3, seed)
    for row in idx:
        for k in range(0, row.size, b):
            run = row[k:k + b]
            assert np.all((np.diff(run) % n) == 1)


def test_block_too_long():
    with pytest.raises(BlockTooLong):
        block_indices(12, 2.0, 10.0, 1, 0)


def _flat(n, eq=0.0, bond=0.0):
    return ReturnSeries((1926, 1), np.full(n, eq)), ReturnSeries((1926, 1), np.full(n, bond))


def test_block_resample_pairs():
    e = ReturnSeries((1926, 1), np.arange(240.0))
    b = ReturnSeries((1926, 1), -np.arange(240.0))
    re, rb, idx = block_resample(e, b, 2.0, 30.0, 1)
    assert re.size == 360 and np.array_equal(re, -rb) and np.array_equal(re, idx.astype(float))


def test_bootstrap_deterministic_bond():
    e, b = _flat(600, 0.01, 0.002)
    s = Scenario()
    st_ = run_bootstrap(Constant(0.0), s, e, b, n_resamples=500, seed=3)
    F = s.bond_terminal_wealth(math.exp(12 * 0.002))
    assert st_.mean == pytest.approx(F, rel=1e-12) and st_.std == pytest.approx(0.0, abs=1e-6 * F)


def test_bootstrap_mean_log_return(fixture_market):
    # resampled monthly equity log returns average to the historical mean
    e = fixture_market.equity_returns.log_returns
    idx = block_indices(e.size, 2.0, 30.0, 10_000, 8)
    path_means = e[idx].mean(axis=1)
    se = path_means.std(ddof=1) / math.sqrt(path_means.size)
    assert abs(path_means.mean() - e.mean()) < 3 * se


def test_replay_flat_bond():
    e, b = _flat(12 * 40)
    s = Scenario(T=10)
    traj = replay_historical({"bond": Constant(0.0)}, s, e, b, (1930, 1))["bond"]
    assert np.allclose(traj, s.W0 + s.c * np.arange(11))


def test_replay_identical_and_window():
    e = ReturnSeries((1926, 1), np.random.default_rng(0).normal(0.005, 0.04, 12 * 40))
    b = ReturnSeries((1926, 1), np.full(12 * 40, 0.001))
    s = Scenario(T=10)
    out = replay_historical({"a": Glide.linear(0.9, 0.3, 10), "b": Glide.linear(0.9, 0.3, 10)}, s, e, b, (1930, 1))
    assert np.array_equal(out["a"], out["b"])
    with pytest.raises(WindowOutOfRange):
        replay_historical({"a": Constant(0.5)}, s, e, b, (1960, 1))


@pytest.mark.slow
@pytest.mark.parametrize("block_years", [0.5, 2.0, 5.0])
def test_block_size_sensitivity(experiment, fixture_market, block_years):
    m = fixture_market
    st = {k: run_bootstrap(experiment["strategies"][k], experiment["scenario"], m.equity_returns, m.bond_returns,
                           block_years, 4000, 17)
          for k in ("constant", "adaptive")}
    assert st["adaptive"].std < st["constant"].std
