"""Per-day log-price series, best bid/ask reconstruction, and time bars.

The trade log has no limit orders, so the book is inferred from the
aggressor flag: an aggressive ask hits the best bid (its price updates the
bid series) and an aggressive bid lifts the best ask.  When one side
crosses the other, the stale side snaps to the new price.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date, datetime, timezone

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

US_PER_MIN = 60 * 1_000_000
US_PER_DAY = 86_400 * 1_000_000

BAR_COLUMNS = (
    "period_start_us",
    "median_price",
    "volume",
    "trade_count",
    "unique_traders",
    "unique_passive_traders",
    "buy_volume",
    "sell_volume",
    "median_rel_spread",
    "jump_flag",
)


@dataclass
class DaySeries:
    """One UTC day of ticks, the unit of jump testing."""

    date: date
    times: np.ndarray  # microseconds since epoch, strictly ascending
    log_prices: np.ndarray
    aggressor_flags: np.ndarray  # "bid" / "ask" per tick
    buyer_ids: np.ndarray
    seller_ids: np.ndarray

    @property
    def n(self) -> int:
        return len(self.times)

    def validate(self) -> None:
        arrays = (self.times, self.log_prices, self.aggressor_flags, self.buyer_ids, self.seller_ids)
        if len({len(a) for a in arrays}) != 1:
            raise DataError("day series arrays have unequal lengths")
        if np.any(np.diff(self.times) <= 0):
            raise DataError("tick times are not strictly ascending")
        if not np.all(np.isfinite(self.log_prices)):
            raise DataError("non-finite log prices")


@dataclass
class QuoteSeries:
    """Per-tick best bid/ask (NaN before the side is first observed)."""

    best_bid: np.ndarray
    best_ask: np.ndarray

    def rel_spread(self) -> np.ndarray:
        """(ask - bid) / mid per tick; NaN where either side is undefined."""
        with np.errstate(invalid="ignore", divide="ignore"):
            mid = 0.5 * (self.best_bid + self.best_ask)
            return (self.best_ask - self.best_bid) / mid


def day_of_us(time_us: int) -> date:
    return datetime.fromtimestamp(time_us // 1_000_000, tz=timezone.utc).date()


def split_days(frame: pd.DataFrame) -> list[tuple[date, pd.DataFrame]]:
    """Partition a canonical tick frame into UTC calendar days, in order."""
    day_index = frame["time_us"].to_numpy() // US_PER_DAY
    out = []
    for key, sub in frame.groupby(day_index, sort=True):
        out.append((datetime.fromtimestamp(int(key) * 86_400, tz=timezone.utc).date(), sub))
    return out


def day_series(day_frame: pd.DataFrame) -> DaySeries:
    """Build a DaySeries from one day's slice of the canonical tick frame.

    Ticks sharing an identical microsecond stamp cannot form a strictly
    ascending sequence; later duplicates are nudged forward by 1 us within
    the day (the raw ids stay unique, this only perturbs tied instants).
    """
    times = day_frame["time_us"].to_numpy(dtype=np.int64).copy()
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            times[i] = times[i - 1] + 1
    prices = day_frame["price"].to_numpy(dtype=float)
    if np.any(prices <= 0):
        raise DataError("non-positive price in day frame")
    series = DaySeries(
        date=day_of_us(int(times[0])),
        times=times,
        log_prices=np.log(prices),
        aggressor_flags=day_frame["aggressor"].to_numpy(),
        buyer_ids=day_frame["buyer_id"].to_numpy(),
        seller_ids=day_frame["seller_id"].to_numpy(),
    )
    series.validate()
    return series


def build_quotes(aggressor_flags: np.ndarray, prices: np.ndarray) -> QuoteSeries:
    """Reconstruct best bid/ask from trade prices and aggressor sides.

    Aggressive asks print at the bid, aggressive bids at the ask.  A crossed
    book snaps the stale side onto the incoming price.  Before a side's
    first observation it stays NaN and spread statistics skip those ticks.
    """
    n = len(prices)
    bid = np.full(n, np.nan)
    ask = np.full(n, np.nan)
    cur_bid = np.nan
    cur_ask = np.nan
    for i in range(n):
        p = prices[i]
        if aggressor_flags[i] == "ask":
            cur_bid = p
            if not np.isnan(cur_ask) and cur_bid > cur_ask:
                cur_ask = p
        else:
            cur_ask = p
            if not np.isnan(cur_bid) and cur_ask < cur_bid:
                cur_bid = p
        bid[i] = cur_bid
        ask[i] = cur_ask
    return QuoteSeries(best_bid=bid, best_ask=ask)


def build_bars(
    frame: pd.DataFrame,
    quotes: QuoteSeries | None = None,
    width_minutes: int = 5,
) -> pd.DataFrame:
    """Aggregate ticks into fixed calendar-time bars.

    One row per ``width_minutes`` interval from the first day's midnight to
    the last day's midnight (UTC), empty intervals included.  The bar price
    is the median tick price, carried forward over empty intervals.  Spread
    is summarized by the median of (ask - bid)/mid over in-bar ticks with a
    two-sided book.
    """
    if (24 * 60) % width_minutes != 0:
        raise DataError(f"bar width {width_minutes} min does not divide 24h")
    if quotes is None:
        quotes = build_quotes(frame["aggressor"].to_numpy(), frame["price"].to_numpy(dtype=float))

    width_us = width_minutes * US_PER_MIN
    times = frame["time_us"].to_numpy(dtype=np.int64)
    if len(times) == 0:
        return pd.DataFrame(columns=list(BAR_COLUMNS))
    first_day_start = (times[0] // US_PER_DAY) * US_PER_DAY
    last_day_end = (times[-1] // US_PER_DAY + 1) * US_PER_DAY
    grid = np.arange(first_day_start, last_day_end, width_us, dtype=np.int64)

    period = (times - first_day_start) // width_us
    prices = frame["price"].to_numpy(dtype=float)
    fiat = frame["fiat"].to_numpy(dtype=float)
    is_buy = frame["aggressor"].to_numpy() == "bid"
    buyers = frame["buyer_id"].to_numpy()
    sellers = frame["seller_id"].to_numpy()
    passive = np.where(is_buy, sellers, buyers)
    rel_spread = quotes.rel_spread()

    n_bars = len(grid)
    median_price = np.full(n_bars, np.nan)
    volume = np.zeros(n_bars)
    buy_volume = np.zeros(n_bars)
    trade_count = np.zeros(n_bars, dtype=np.int64)
    unique_traders = np.zeros(n_bars, dtype=np.int64)
    unique_passive = np.zeros(n_bars, dtype=np.int64)
    med_spread = np.full(n_bars, np.nan)

    # Ticks are time-sorted, so each bar is a contiguous slice.
    bounds = np.searchsorted(period, np.arange(n_bars + 1))
    for b in range(n_bars):
        lo, hi = bounds[b], bounds[b + 1]
        if lo == hi:
            continue
        median_price[b] = np.median(prices[lo:hi])
        volume[b] = fiat[lo:hi].sum()
        buy_volume[b] = fiat[lo:hi][is_buy[lo:hi]].sum()
        trade_count[b] = hi - lo
        unique_traders[b] = len(set(buyers[lo:hi]) | set(sellers[lo:hi]))
        unique_passive[b] = len(set(passive[lo:hi]))
        spreads = rel_spread[lo:hi]
        spreads = spreads[~np.isnan(spreads)]
        if len(spreads):
            med_spread[b] = np.median(spreads)

    bars = pd.DataFrame(
        {
            "period_start_us": grid,
            "median_price": pd.Series(median_price).ffill().to_numpy(),
            "volume": volume,
            "trade_count": trade_count,
            "unique_traders": unique_traders,
            "unique_passive_traders": unique_passive,
            "buy_volume": buy_volume,
            "sell_volume": volume - buy_volume,
            "median_rel_spread": med_spread,
            "jump_flag": np.zeros(n_bars, dtype=np.int64),
        }
    )
    return bars
