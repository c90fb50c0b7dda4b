
import pytest

from glidelab.fixtures import FIXTURE_PATH
from glidelab.jump_model import KouParams, fit_mle, with_bond_drift
from glidelab.market_data import load_real_market

# Parameters in the neighbourhood of the fitted long-run US market, used where
# a test needs a realistic but fixed jump diffusion.
REFERENCE = KouParams(mu=0.0874, sigma=0.1452, lam=0.3237, p_up=0.2230, eta1=4.3625, eta2=5.5049, r=0.00623)


@pytest.fixture(scope="session")
def fixture_market():
    return load_real_market(FIXTURE_PATH)


@pytest.fixture(scope="session")
def fitted(fixture_market):
    res = fit_mle(fixture_market.equity_returns)
    return res, with_bond_drift(res.params, fixture_market.bond_drift)


@pytest.fixture(scope="session")
def reference_params():
    return REFERENCE


# -- acceptance bookkeeping --------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """record(criterion, ok, detail): remember one acceptance line, then assert."""

    def _rec(key, ok, detail=""):
        _ACCEPTANCE[key] = (bool(ok), detail)
        return ok

    return _rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[0][2:])):
        ok, detail = _ACCEPTANCE[key]
        if ok is None:
            status = "SKIP"
        else:
            status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{key}: {status}  {detail}")


def record_skip(key, reason):
    _ACCEPTANCE[key] = (None, reason)


@pytest.fixture(scope="session")
def experiment(fitted):
    """Fitted fixture market with the three strategies matched at constant p = 0.6."""
    import numpy as np

    from glidelab.adaptive import MCConfig, calibrate_target
    from glidelab.glide import PeriodMoments, optimize_glide, wealth_moments
    from glidelab.strategy import Adaptive, Constant, Glide, Scenario

    _, params = fitted
    s = Scenario()
    pm = PeriodMoments.from_params(params, s.dt)
    goal = wealth_moments(np.full(s.T, 0.6), s, pm)[0]
    glide = optimize_glide(s, pm, goal)
    w_star, grid = calibrate_target(params, s, goal, MCConfig())
    return dict(params=params, scenario=s, pm=pm, goal=goal, w_star=w_star, grid=grid,
                strategies={"constant": Constant(0.6), "glide": Glide(glide), "adaptive": Adaptive(grid)})
