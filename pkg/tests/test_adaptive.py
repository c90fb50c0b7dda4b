import math

import numpy as np
import pytest

from glidelab.adaptive import (
    GridConfig,
    MCConfig,
    PolicyGrid,
    bond_continuation,
    calibrate_target,
    load_policy,
    policy_lookup,
    save_policy,
    solve_policy,
)
from glidelab.errors import GridTooSmall, InfeasibleGoal, UnknownTime
from glidelab.jump_model import gross_moments
from glidelab.simulation import run_monte_carlo
from glidelab.strategy import Adaptive, Scenario

SMALL = GridConfig(n_wealth=256, n_quad=256)


def test_single_period_closed_form(reference_params):
    s = Scenario(T=1)
    w_star = 40_000.0
    grid = solve_policy(reference_params, s, w_star)
    e1, e2 = gross_moments(reference_params, 1.0)
    b = math.exp(reference_params.r)
    ps = np.linspace(0, 1, 10_001)
    for w, p in zip(grid.wealth_nodes, grid.policy[0]):
        g = w + s.c
        # E[(g(pR + (1-p)b) - W*)^2] in closed form, scanned at 1e-4 steps
        obj = g * g * (ps ** 2 * (e2 - 2 * e1 * b + b * b) + 2 * ps * b * (e1 - b) + b * b) - 2 * w_star * g * (ps * (e1 - b) + b)
        p_oracle = ps[np.argmin(obj)]
        assert abs(p - p_oracle) <= 0.005, (w, p, p_oracle)


def test_overshoot_nodes_hold_no_equity(reference_params):
    s = Scenario(T=30)
    w_star = 1.2e6
    grid = solve_policy(reference_params, s, w_star, SMALL)
    b = math.exp(reference_params.r)
    for t in range(30):
        reach = bond_continuation(s, grid.wealth_nodes, t, b) >= w_star
        assert reach.any()
        assert np.all(grid.policy[t][reach] == 0.0)


def test_zero_risk_fixed_point(reference_params):
    s = Scenario(T=10)
    b = math.exp(reference_params.r)
    F = s.bond_terminal_wealth(b)
    grid = solve_policy(reference_params, s, F, SMALL)
    assert grid.value_at(s.W0, 0) == pytest.approx(0.0, abs=1e-6 * F * F)
    w, _ = run_monte_carlo(Adaptive(grid), s, reference_params, 20_000, 1)
    assert np.max(np.abs(w - F)) <= 1e-6 * F


def test_lookup_rules():
    nodes = np.array([0.0, 1.0, 2.0, 3.0])
    pol = np.array([[0.9, 0.2, 0.4, 0.0]])
    g = PolicyGrid(np.arange(1), nodes, pol, np.zeros((2, 4)), 10.0, np.array([100.0]))
    assert policy_lookup(g, 1.0, 0) == 0.2
    assert policy_lookup(g, 1.5, 0) == pytest.approx(0.3)
    assert policy_lookup(g, 50.0, 0) == 0.0
    with pytest.raises(UnknownTime):
        policy_lookup(g, 1.0, 1)


def test_lookup_above_w_max_is_zero(reference_params):
    grid = solve_policy(reference_params, Scenario(T=3), 100_000.0, SMALL)
    for t in range(3):
        assert policy_lookup(grid, grid.wealth_nodes[-1] * 5, t) == 0.0


def test_policy_roundtrip(tmp_path, reference_params):
    grid = solve_policy(reference_params, Scenario(T=3), 100_000.0, SMALL)
    path = tmp_path / "policy.json"
    save_policy(grid, str(path))
    back = load_policy(str(path))
    assert np.array_equal(back.policy, grid.policy)
    assert np.array_equal(back.wealth_nodes, grid.wealth_nodes)
    assert back.target == grid.target and back.params_digest == reference_params.digest()


def test_grid_too_small(reference_params):
    with pytest.raises(ValueError):
        solve_policy(reference_params, Scenario(T=3), 1e5, GridConfig(w_max_factor=4))
    # a tiny loss budget cannot be met by heavy-tailed returns
    with pytest.raises(GridTooSmall):
        solve_policy(reference_params, Scenario(T=3), 1e5, GridConfig(n_wealth=128, n_quad=128, max_lost_mass=0.0))


def test_goal_below_bond_wealth(reference_params):
    s = Scenario(T=5)
    F = s.bond_terminal_wealth(math.exp(reference_params.r))
    with pytest.raises(InfeasibleGoal):
        calibrate_target(reference_params, s, 0.9 * F)


def test_calibration_monotone(reference_params):
    s = Scenario(T=10)
    F = s.bond_terminal_wealth(math.exp(reference_params.r))
    mc = MCConfig(n_paths=30_000, seed=4)
    w0, g0 = calibrate_target(reference_params, s, F, mc, SMALL)
    assert w0 == pytest.approx(F, rel=1e-3)
    # every reachable state sits on the all-bond trajectory, where p = 0
    w, diag = run_monte_carlo(Adaptive(g0), s, reference_params, 10_000, 2)
    assert np.all(diag.mean_p == 0) and np.all(diag.std_p == 0)
    assert np.ptp(w) == 0 and np.std(w) <= 1e-12 * F
    stars = []
    for goal in np.linspace(1.05, 1.45, 5) * F:
        w, _ = calibrate_target(reference_params, s, goal, mc, SMALL)
        assert w > goal
        stars.append(w)
    assert all(a <= b for a, b in zip(stars, stars[1:]))


@pytest.mark.slow
def test_quadrature_refinement(fitted):
    _, params = fitted
    s = Scenario(T=10)
    v = [solve_policy(params, s, 300_000.0, GridConfig(n_quad=n)).value_at(s.W0) for n in (512, 4096)]
    assert abs(v[0] / v[1] - 1) < 0.002
