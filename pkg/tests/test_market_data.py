import io

import numpy as np
import pytest

from glidelab.errors import DegenerateSeries, GapInDates, LengthMismatch, MalformedRow, NonPositiveLevel, WindowOutOfRange
from glidelab.fixtures import FIXTURE_PATH
from glidelab.market_data import (
    MonthlySeries,
    ReturnSeries,
    estimate_bond_drift,
    format_month,
    load_monthly_series,
    load_real_market,
    month_add,
    parse_month,
    standardize_returns,
    to_real_index,
)

HEAD = "date,equity_nominal,bill_nominal,cpi\n"


def test_two_row_file_echoes_levels():
    s = load_monthly_series(io.StringIO(HEAD + "1926-01,100,100,10\n1926-02,110,101,10\n"))
    assert list(s["equity_nominal"].values) == [100.0, 110.0]
    assert s["equity_nominal"].start_month == (1926, 1)


def test_bytes_and_path_sources(tmp_path):
    text = HEAD + "1926-01,100,100,10\n1926-02,110,101,10\n"
    p = tmp_path / "m.csv"
    p.write_text(text)
    a = load_monthly_series(str(p))["cpi"].values
    b = load_monthly_series(text.encode())["cpi"].values
    assert np.array_equal(a, b)


def test_gap_in_dates():
    with pytest.raises(GapInDates):
        load_monthly_series(io.StringIO(HEAD + "1926-01,100,100,10\n1926-03,110,101,10\n"))


def test_zero_level():
    with pytest.raises(NonPositiveLevel):
        load_monthly_series(io.StringIO(HEAD + "1926-01,0,100,10\n1926-02,110,101,10\n"))


def test_malformed_row():
    with pytest.raises(MalformedRow):
        load_monthly_series(io.StringIO(HEAD + "1926-01,abc,100,10\n1926-02,110,101,10\n"))
    with pytest.raises(MalformedRow):
        load_monthly_series(io.StringIO(HEAD + "1926-01,100,100,10\n1926-02,100,100\n"))


@pytest.mark.parametrize("nom,cpi,expected", [
    ([100, 200], [100, 200], [100, 100]),
    ([100, 110], [100, 100], [100, 110]),
    ([100, 120], [100, 110], [100, 120 * 100 / 110]),
])
def test_real_index(nom, cpi, expected):
    r = to_real_index(MonthlySeries((1926, 1), np.array(nom, float)), MonthlySeries((1926, 1), np.array(cpi, float)))
    assert np.allclose(r.values, expected, rtol=1e-14)


def test_real_index_length_mismatch():
    with pytest.raises(LengthMismatch):
        to_real_index(MonthlySeries((1926, 1), np.array([1.0, 2.0])), MonthlySeries((1926, 1), np.array([1.0])))


def test_standardize():
    z = standardize_returns(ReturnSeries((1926, 2), np.array([0.01, 0.02, 0.03])))
    assert np.allclose(z.log_returns, [-1, 0, 1], atol=1e-12)
    z2 = standardize_returns(z)
    assert np.allclose(z2.log_returns, z.log_returns, atol=1e-12)
    with pytest.raises(DegenerateSeries):
        standardize_returns(ReturnSeries((1926, 2), np.array([0.05, 0.05])))


def test_bond_drift_examples():
    assert estimate_bond_drift(MonthlySeries((1926, 1), np.array([100.0, 100.0, 100.0]))) == 0.0
    lvl = 100 * np.exp(0.005 * np.arange(25))
    assert abs(estimate_bond_drift(MonthlySeries((1926, 1), lvl)) - 0.06) < 1e-12


def test_bond_drift_fixture_recomputed():
    # independent recomputation straight from the CSV text
    rows = [l.split(",") for l in open(FIXTURE_PATH).read().splitlines()[1:]]
    bill = np.array([float(r[2]) for r in rows])
    cpi = np.array([float(r[3]) for r in rows])
    real = bill / cpi
    logs = [np.log(real[i + 1] / real[i]) for i in range(len(real) - 1)]
    expected = 12 * sum(logs) / len(logs)
    assert abs(load_real_market(FIXTURE_PATH).bond_drift - expected) < 1e-10


def test_months_roundtrip():
    assert month_add((1925, 12), 1) == (1926, 1)
    assert month_add((1926, 1), -1) == (1925, 12)
    assert parse_month(format_month((1985, 7))) == (1985, 7)


def test_window():
    r = ReturnSeries((1926, 1), np.arange(24.0))
    w = r.window((1926, 3), 5)
    assert w.start_month == (1926, 3) and list(w.log_returns) == [2, 3, 4, 5, 6]
    with pytest.raises(WindowOutOfRange):
        r.window((1927, 10), 5)


def test_fixture_shape(fixture_market):
    assert len(fixture_market.equity) == 1081
    assert fixture_market.equity.start_month == (1925, 12)
    assert fixture_market.equity_returns.start_month == (1926, 1)
    assert len(fixture_market.equity_returns) == 1080
