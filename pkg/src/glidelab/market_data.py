"""Monthly index ingestion, inflation adjustment and return series.

CSV layout (one row per month, ascending, no gaps)::

    date,equity_nominal,bill_nominal,cpi
    1925-12,100.0,100.0,17.3
    ...

Log returns are the internal currency; gross returns are ``exp`` of them.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, Iterable, TextIO, Tuple, Union

import numpy as np

from .errors import (
    DegenerateSeries,
    GapInDates,
    InsufficientData,
    LengthMismatch,
    MalformedRow,
    NonPositiveLevel,
    WindowOutOfRange,
)

HEADER = ("date", "equity_nominal", "bill_nominal", "cpi")

Month = Tuple[int, int]


def month_add(month: Month, n: int) -> Month:
    y, m = month
    k = y * 12 + (m - 1) + n
    return (k // 12, k % 12 + 1)


def month_index(month: Month) -> int:
    return month[0] * 12 + month[1] - 1


def format_month(month: Month) -> str:
    return f"{month[0]:04d}-{month[1]:02d}"


def parse_month(text: str) -> Month:
    text = text.strip()
    parts = text.split("-")
    if len(parts) != 2 or len(parts[0]) != 4 or len(parts[1]) != 2:
        raise ValueError(f"bad month {text!r}")
    y, m = int(parts[0]), int(parts[1])
    if not 1 <= m <= 12:
        raise ValueError(f"bad month {text!r}")
    return (y, m)


@dataclass(frozen=True)
class MonthlySeries:
    start_month: Month
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InsufficientData("series must be a non-empty 1-d sequence")
        if not np.all(v > 0):
            raise NonPositiveLevel("index levels must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def end_month(self) -> Month:
        return month_add(self.start_month, len(self) - 1)

    def log_returns(self) -> "ReturnSeries":
        if len(self) < 2:
            raise InsufficientData("need at least two levels for a return")
        return ReturnSeries(month_add(self.start_month, 1), np.diff(np.log(self.values)))


@dataclass(frozen=True)
class ReturnSeries:
    """Monthly log returns; ``start_month`` is the month the first return is earned in."""

    start_month: Month
    log_returns: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.asarray(self.log_returns, dtype=float)
        if r.ndim != 1:
            raise ValueError("returns must be 1-d")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns must be finite")
        r.setflags(write=False)
        object.__setattr__(self, "log_returns", r)

    def __len__(self):
        return self.log_returns.size

    def window(self, start: Month, n_months: int) -> "ReturnSeries":
        i0 = month_index(start) - month_index(self.start_month)
        if i0 < 0 or i0 + n_months > len(self):
            raise WindowOutOfRange(f"window {format_month(start)} + {n_months} months outside data")
        return ReturnSeries(start, self.log_returns[i0:i0 + n_months])


def _open_text(source) -> Tuple[TextIO, bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def load_monthly_series(source: Union[str, os.PathLike, bytes, BinaryIO, TextIO]) -> Dict[str, MonthlySeries]:
    """Read the market CSV into one :class:`MonthlySeries` per value column.

    ``source`` may be a path, raw bytes, or an open text/binary stream.
    """
    fh, owned = _open_text(source)
    try:
        rows = list(csv.reader(fh))
    finally:
        if owned:
            fh.close()
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise MalformedRow("empty file")
    header = tuple(c.strip() for c in rows[0])
    if header[0] != "date" or len(header) < 2:
        raise MalformedRow(f"bad header {rows[0]!r}; expected {','.join(HEADER)}")
    body = rows[1:]
    if len(body) < 2:
        raise InsufficientData("need at least 2 monthly rows")

    months = []
    cols = [[] for _ in header[1:]]
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise MalformedRow(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            months.append(parse_month(row[0]))
            vals = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from None
        for j, v in enumerate(vals):
            if not np.isfinite(v):
                raise MalformedRow(f"line {lineno}: non-finite value")
            if v <= 0:
                raise NonPositiveLevel(f"line {lineno}: {header[j + 1]} = {v} is not positive")
            cols[j].append(v)

    idx = np.array([month_index(m) for m in months])
    steps = np.diff(idx)
    if np.any(steps != 1):
        k = int(np.flatnonzero(steps != 1)[0])
        raise GapInDates(
            f"months not contiguous: {format_month(months[k])} followed by {format_month(months[k + 1])}"
        )
    return {name: MonthlySeries(months[0], np.array(col)) for name, col in zip(header[1:], cols)}


def to_real_index(nominal: MonthlySeries, cpi: MonthlySeries) -> MonthlySeries:
    """Deflate by CPI, rebased so the first real level equals the first nominal level."""
    if len(nominal) != len(cpi) or nominal.start_month != cpi.start_month:
        raise LengthMismatch("nominal and CPI series must share start month and length")
    real = nominal.values * (cpi.values[0] / cpi.values)
    return MonthlySeries(nominal.start_month, real)


def standardize_returns(series: ReturnSeries) -> ReturnSeries:
    r = series.log_returns
    if r.size < 2:
        raise DegenerateSeries("need at least two returns")
    sd = r.std(ddof=1)
    if not sd > 0:
        raise DegenerateSeries("zero sample variance")
    return ReturnSeries(series.start_month, (r - r.mean()) / sd)


def estimate_bond_drift(real_bond_index: MonthlySeries) -> float:
    """Annualized real log drift: 12 x mean monthly log change."""
    if len(real_bond_index) < 2:
        raise InsufficientData("need at least two levels")
    return 12.0 * float(np.mean(np.diff(np.log(real_bond_index.values))))


@dataclass(frozen=True)
class RealMarket:
    """Real equity and real bond indexes built from one market CSV."""

    equity: MonthlySeries
    bond: MonthlySeries

    @property
    def equity_returns(self) -> ReturnSeries:
        return self.equity.log_returns()

    @property
    def bond_returns(self) -> ReturnSeries:
        return self.bond.log_returns()

    @property
    def bond_drift(self) -> float:
        return estimate_bond_drift(self.bond)


def load_real_market(source) -> RealMarket:
    series = load_monthly_series(source)
    missing = [h for h in HEADER[1:] if h not in series]
    if missing:
        raise MalformedRow(f"missing columns: {', '.join(missing)}")
    cpi = series["cpi"]
    return RealMarket(
        equity=to_real_index(series["equity_nominal"], cpi),
        bond=to_real_index(series["bill_nominal"], cpi),
    )


def write_real_csv(market: RealMarket, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["date", "equity_real", "bond_real"])
    for i, (e, b) in enumerate(zip(market.equity.values, market.bond.values)):
        w.writerow([format_month(month_add(market.equity.start_month, i)), repr(float(e)), repr(float(b))])


def iter_months(start: Month, n: int) -> Iterable[Month]:
    for i in range(n):
        yield month_add(start, i)
