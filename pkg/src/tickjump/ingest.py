"""Parsing and cleaning of raw exchange trade logs.

The raw files carry one row per trade leg (a buy leg and a sell leg share a
trade ID).  The trade ID doubles as the execution timestamp: its decimal
digits are a POSIX second count followed by a six-digit microsecond part.
The cleaning protocol is:

1. aggregate legs by trade ID, dropping duplicates, half trades and
   self-trades (same user on both legs);
2. keep USD trades with a fiat amount of at least $0.10, price the trade as
   fiat/btc rounded to three decimals, and drop zero or extreme prices
   (above $10,000) plus, when a daily high-low file is supplied, prices
   outside the banded daily range;
3. remove one-tick "bounceback" outliers that fully revert immediately.

Output ticks are strictly ordered by (execution time, trade id).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timezone

from .errors import MalformedTradeId

logger = logging.getLogger(__name__)

MIN_TRADE_ID_DIGITS = 11
MIN_FIAT_USD = 0.10
MAX_PRICE_USD = 10_000.0

#: Canonical tick file column order (CSV, one row per aggregated trade).
TICK_COLUMNS = (
    "time_us",
    "trade_id",
    "buyer_id",
    "seller_id",
    "aggressor",
    "price",
    "fiat",
    "btc",
)


@dataclass(frozen=True)
class RawTradeRow:
    """One leg of a trade as it appears in the raw log."""

    trade_id: str
    side: str  # "buy" or "sell"
    user_id: str
    currency: str
    fiat_amount: float
    btc_amount: float
    timestamp_text: str = ""
    fiat_fee: float = 0.0
    btc_fee: float = 0.0
    # Side that initiated the trade ("bid" = aggressive buyer, "ask" =
    # aggressive seller).  May be empty on one leg; the paired value is the
    # first non-empty one.
    aggressor: str = ""


@dataclass(frozen=True)
class PairedTrade:
    """Buy and sell leg joined on the trade id."""

    trade_id: str
    buy: RawTradeRow
    sell: RawTradeRow
    aggressor: str


@dataclass(frozen=True)
class TickTrade:
    """One cleaned trade."""

    exec_time: datetime
    trade_id: int
    buyer_id: str
    seller_id: str
    aggressor: str  # "bid" or "ask"
    price: float  # USD per BTC, rounded to 3 decimals
    fiat_amount: float
    btc_amount: float


@dataclass
class CleaningReport:
    """Accounting of one cleaning stage.

    ``accepted + sum(rejections.values())`` equals the number of records the
    stage received, in the stage's own record unit (rows for leg
    aggregation, leg pairs for trade cleaning, ticks for the bounceback
    filter).
    """

    stage: str
    input_count: int = 0
    accepted: int = 0
    rejections: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str, count: int = 1) -> None:
        self.rejections[reason] = self.rejections.get(reason, 0) + count

    @property
    def rejected(self) -> int:
        return sum(self.rejections.values())

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "input_count": self.input_count,
            "accepted": self.accepted,
            "rejections": dict(self.rejections),
        }


def parse_trade_id(trade_id: str) -> datetime:
    """Decode the execution instant packed into a trade id.

    The last six digits are microseconds, the leading digits are POSIX
    seconds.  Raises :class:`MalformedTradeId` for anything else.
    """
    if not trade_id.isdigit() or len(trade_id) < MIN_TRADE_ID_DIGITS:
        raise MalformedTradeId(f"trade id {trade_id!r} is not a timestamp-encoded id")
    seconds = int(trade_id[:-6])
    micros = int(trade_id[-6:])
    return datetime.fromtimestamp(seconds, tz=timezone.utc).replace(microsecond=micros)


def aggregate_legs(rows: list[RawTradeRow]) -> tuple[list[PairedTrade], CleaningReport]:
    """Join buy and sell legs on the trade id.

    Byte-identical rows and repeated (trade_id, side) pairs are duplicates;
    the first occurrence wins.  Groups without both legs, with the same user
    on both legs, or without any aggressor information are rejected.  Report
    counts are in row units.
    """
    report = CleaningReport(stage="aggregate_legs", input_count=len(rows))
    legs: dict[str, dict[str, RawTradeRow]] = {}
    for row in rows:
        sides = legs.setdefault(row.trade_id, {})
        if row.side in sides:
            report.reject("duplicate")
            continue
        sides[row.side] = row

    pairs: list[PairedTrade] = []
    for trade_id, sides in legs.items():
        if "buy" not in sides or "sell" not in sides:
            report.reject("missing-leg", count=len(sides))
            continue
        buy, sell = sides["buy"], sides["sell"]
        if buy.user_id == sell.user_id:
            report.reject("self-trade", count=2)
            continue
        aggressor = buy.aggressor or sell.aggressor
        if aggressor not in ("bid", "ask"):
            report.reject("missing-aggressor", count=2)
            continue
        pairs.append(PairedTrade(trade_id=trade_id, buy=buy, sell=sell, aggressor=aggressor))
        report.accepted += 2
    return pairs, report


def clean_trades(
    pairs: list[PairedTrade],
    daily_band: dict[date, tuple[float, float]] | None = None,
    band_margin: float = 0.20,
) -> tuple[list[TickTrade], CleaningReport]:
    """Validate paired trades and produce priced ticks.

    USD only; the price is fiat/btc rounded to three decimals.  The optional
    ``daily_band`` maps a UTC date to that day's (low, high) reference price
    range; prices outside ``[low*(1-margin), high*(1+margin)]`` are dropped.
    Output is sorted by (exec_time, trade_id).
    """
    report = CleaningReport(stage="clean_trades", input_count=len(pairs))
    ticks: list[TickTrade] = []
    for pair in pairs:
        try:
            exec_time = parse_trade_id(pair.trade_id)
        except MalformedTradeId:
            report.reject("malformed-id")
            continue
        buy = pair.buy
        if buy.currency.upper() != "USD" or pair.sell.currency.upper() != "USD":
            report.reject("non-USD")
            continue
        if buy.fiat_amount < MIN_FIAT_USD:
            report.reject("sub-minimum-fiat")
            continue
        if buy.btc_amount <= 0:
            report.reject("zero-or-extreme-price")
            continue
        price = round(buy.fiat_amount / buy.btc_amount, 3)
        if price <= 0 or price > MAX_PRICE_USD:
            report.reject("zero-or-extreme-price")
            continue
        if daily_band is not None:
            band = daily_band.get(exec_time.date())
            if band is not None:
                low, high = band
                if price < low * (1 - band_margin) or price > high * (1 + band_margin):
                    report.reject("outside-high-low-band")
                    continue
        ticks.append(
            TickTrade(
                exec_time=exec_time,
                trade_id=int(pair.trade_id),
                buyer_id=buy.user_id,
                seller_id=pair.sell.user_id,
                aggressor=pair.aggressor,
                price=price,
                fiat_amount=buy.fiat_amount,
                btc_amount=buy.btc_amount,
            )
        )
        report.accepted += 1
    ticks.sort(key=lambda t: (t.exec_time, t.trade_id))
    return ticks, report


def filter_bouncebacks(
    ticks: list[TickTrade],
    threshold_mads: float = 5.0,
    reversion_tol: float = 0.25,
    window: int = 25,
) -> tuple[list[TickTrade], CleaningReport]:
    """Drop isolated ticks that spike and immediately revert.

    A tick is removed when its incoming log return is an outlier relative to
    the rolling median absolute deviation of the surrounding returns
    (excluding its own) and the next return undoes at least
    ``1 - reversion_tol`` of the move.  Single pass.
    """
    import math

    report = CleaningReport(stage="filter_bouncebacks", input_count=len(ticks))
    n = len(ticks)
    if n < 3:
        report.accepted = n
        return list(ticks), report

    # r[i] is the log return into tick i (r[0] unused).
    r = [0.0] * n
    for i in range(1, n):
        r[i] = math.log(ticks[i].price / ticks[i - 1].price)

    def neighbor_mad(i: int) -> float:
        lo, hi = max(1, i - window), min(n - 1, i + window)
        neighbors = [r[j] for j in range(lo, hi + 1) if j != i]
        if not neighbors:
            return float("inf")
        neighbors.sort()
        med = _median_sorted(neighbors)
        devs = sorted(abs(x - med) for x in neighbors)
        return _median_sorted(devs)

    drop = [False] * n
    for i in range(1, n - 1):
        if abs(r[i]) > threshold_mads * neighbor_mad(i) and abs(r[i] + r[i + 1]) <= reversion_tol * abs(r[i]):
            drop[i] = True

    kept = [t for t, d in zip(ticks, drop) if not d]
    report.accepted = len(kept)
    if n - len(kept):
        report.reject("bounceback", count=n - len(kept))
    return kept, report


def _median_sorted(values: list[float]) -> float:
    m = len(values)
    half = m // 2
    if m % 2:
        return values[half]
    return 0.5 * (values[half - 1] + values[half])


def read_raw_csv(
    path: str,
    column_map: dict[str, str | int] | None = None,
    has_header: bool = True,
) -> list[RawTradeRow]:
    """Load raw trade-leg rows from a CSV file.

    ``column_map`` maps :class:`RawTradeRow` field names to header names (or
    to zero-based column indices for headerless files).  Unmapped optional
    fields default to empty/zero.
    """
    column_map = dict(column_map or DEFAULT_RAW_COLUMNS)
    rows: list[RawTradeRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header: dict[str, int] = {}
        if has_header:
            first = next(reader, None)
            if first is None:
                return rows
            header = {name.strip(): i for i, name in enumerate(first)}
        for record in reader:
            if not record:
                continue
            values = {}
            for fld, col in column_map.items():
                idx = col if isinstance(col, int) else header.get(col)
                values[fld] = record[idx].strip() if idx is not None and idx < len(record) else ""
            rows.append(
                RawTradeRow(
                    trade_id=values.get("trade_id", ""),
                    side=values.get("side", "").lower(),
                    user_id=values.get("user_id", ""),
                    currency=values.get("currency", ""),
                    fiat_amount=_to_float(values.get("fiat_amount", "")),
                    btc_amount=_to_float(values.get("btc_amount", "")),
                    timestamp_text=values.get("timestamp_text", ""),
                    fiat_fee=_to_float(values.get("fiat_fee", "")),
                    btc_fee=_to_float(values.get("btc_fee", "")),
                    aggressor=values.get("aggressor", "").lower(),
                )
            )
    return rows


DEFAULT_RAW_COLUMNS: dict[str, str | int] = {
    "trade_id": "trade_id",
    "side": "side",
    "user_id": "user_id",
    "currency": "currency",
    "fiat_amount": "fiat",
    "btc_amount": "btc",
    "timestamp_text": "time",
    "aggressor": "aggressor",
}


def read_band_csv(path: str) -> dict[date, tuple[float, float]]:
    """Load the optional daily high-low side file (date, low, high)."""
    band: dict[date, tuple[float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for record in reader:
            if not record or record[0].lower() in ("date", ""):
                continue
            day = date.fromisoformat(record[0].strip())
            band[day] = (float(record[1]), float(record[2]))
    return band


_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def datetime_to_us(dt: datetime) -> int:
    """Microseconds since the epoch, exact (no float round-trip)."""
    delta = dt - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1_000_000 + delta.microseconds


def us_to_datetime(us: int) -> datetime:
    return datetime.fromtimestamp(us // 1_000_000, tz=timezone.utc).replace(
        microsecond=int(us % 1_000_000)
    )


def ticks_to_frame(ticks: list[TickTrade]):
    """Canonical tick table as a pandas DataFrame (column order TICK_COLUMNS)."""
    import pandas as pd

    return pd.DataFrame(
        {
            "time_us": [datetime_to_us(t.exec_time) for t in ticks],
            "trade_id": [t.trade_id for t in ticks],
            "buyer_id": [t.buyer_id for t in ticks],
            "seller_id": [t.seller_id for t in ticks],
            "aggressor": [t.aggressor for t in ticks],
            "price": [t.price for t in ticks],
            "fiat": [t.fiat_amount for t in ticks],
            "btc": [t.btc_amount for t in ticks],
        }
    )


def write_ticks(frame, path: str) -> None:
    frame.to_csv(path, index=False, columns=list(TICK_COLUMNS))


def read_ticks(path: str):
    """Read a canonical tick file, enforcing column presence and time order."""
    import pandas as pd

    frame = pd.read_csv(path, dtype={"buyer_id": str, "seller_id": str, "aggressor": str})
    missing = [c for c in TICK_COLUMNS if c not in frame.columns]
    if missing:
        from .errors import DataError

        raise DataError(f"tick file {path} lacks columns: {missing}")
    frame = frame.sort_values(["time_us", "trade_id"], kind="mergesort").reset_index(drop=True)
    return frame


def _to_float(text: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        return 0.0
