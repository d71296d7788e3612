"""Per-period covariates on the bar grid, with next-period jump labels.

Each five-minute bar yields the spread, order-flow, trader-composition,
price, variance and activity measures used by the predictability model,
plus Y_next: whether the following bar overlaps a detected jump's
localization window.  Undefined values (empty or too-thin bars) are
carried forward and the row is flagged missing; flagged rows are for
inspection only and are dropped before regression.
"""

from __future__ import annotations

import logging
from datetime import date as Date
from datetime import timedelta

import numpy as np
import pandas as pd

from . import estimators
from .errors import InsufficientData
from .multiplicity import subperiod_labels
from .series import US_PER_DAY, QuoteSeries, build_bars

logger = logging.getLogger(__name__)

_EPOCH = Date(1970, 1, 1)

FEATURE_COLUMNS = (
    "period_start_us",
    "date",
    "subperiod",
    "jump_here",
    "jump_next",
    "med_spread",
    "order_flow",
    "whale_ratio",
    "med_price",
    "rv",
    "nv",
    "volume",
    "n_traders",
    "missing",
)

def order_flow_imbalance(fiat, is_buy_aggressor) -> float:
    """|aggressive buy volume - aggressive sell volume| in fiat units."""
    fiat = np.asarray(fiat, dtype=float)
    buy = np.asarray(is_buy_aggressor, dtype=bool)
    if fiat.size == 0:
        return 0.0
    bought = float(fiat[buy].sum())
    return abs(bought - (float(fiat.sum()) - bought))


def whale_index(buyer_ids, seller_ids, is_buy_aggressor) -> float:
    """Unique passive traders over unique traders on both sides.

    Near 1 when activity is one-sided aggression against a broad passive
    crowd; raises InsufficientData for an empty period (callers carry the
    previous value forward).
    """
    buyers = np.asarray(buyer_ids)
    sellers = np.asarray(seller_ids)
    if buyers.size == 0:
        raise InsufficientData("no trades in period")
    buy = np.asarray(is_buy_aggressor, dtype=bool)
    passive = np.where(buy, sellers, buyers)
    total = set(buyers) | set(sellers)
    return len(set(passive)) / len(total)


def period_rv_nv(log_prices, k: int = 4, preavg_const: float = 0.2) -> tuple[float, float]:
    """Noise-robust realized variance and noise variance of one period.

    Raises InsufficientData when the window is too thin for the
    pre-averaged estimator (fewer than 4k ticks, or too few blocks).
    """
    logp = np.asarray(log_prices, dtype=float)
    if len(logp) < 4 * k:
        raise InsufficientData(f"period has {len(logp)} ticks, need {4 * k}")
    vol = estimators.robust_volatility(
        logp, k=k, preavg_const=preavg_const, min_blocks=4
    )
    noise = estimators.noise_variance(logp, k)
    return vol.sigma2T, noise.q2


def align_jump_flags(detections, bars: pd.DataFrame, rejected_dates=None) -> np.ndarray:
    """Per-bar indicator: bar overlaps a detection's localization window.

    Only detections on FDR-rejected days count when rejected_dates is
    given; windows are closed intervals, so a window straddling a bar
    boundary flags both bars.
    """
    starts = bars["period_start_us"].to_numpy(dtype=np.int64)
    if len(starts) == 0:
        return np.zeros(0, dtype=np.int64)
    width = int(starts[1] - starts[0]) if len(starts) > 1 else US_PER_DAY
    flags = np.zeros(len(starts), dtype=np.int64)
    for det in detections:
        if rejected_dates is not None and det.date not in rejected_dates:
            continue
        overlap = (starts <= det.loc_end) & (det.loc_start < starts + width)
        flags[overlap] = 1
    return flags


def build_features(
    frame: pd.DataFrame,
    quotes: QuoteSeries | None = None,
    detections=(),
    rejected_dates=None,
    bar_width: int = 5,
    k: int = 4,
    preavg_const: float = 0.2,
    subperiod_bounds=None,
) -> pd.DataFrame:
    """Feature matrix over the bar grid of a canonical tick frame.

    One row per bar except the sample's last (it has no next period).
    No look-ahead: every covariate at row i uses only ticks inside bar i;
    only the label jump_next refers to bar i+1.
    """
    bars = build_bars(frame, quotes=quotes, width_minutes=bar_width)
    n_bars = len(bars)
    if n_bars < 2:
        raise InsufficientData("need at least two bars for next-period labels")

    times = frame["time_us"].to_numpy(dtype=np.int64)
    logp = np.log(frame["price"].to_numpy(dtype=float))
    fiat = frame["fiat"].to_numpy(dtype=float)
    buyers = frame["buyer_id"].to_numpy()
    sellers = frame["seller_id"].to_numpy()
    is_buy = frame["aggressor"].to_numpy() == "bid"

    starts = bars["period_start_us"].to_numpy(dtype=np.int64)
    width_us = int(starts[1] - starts[0])
    period = (times - starts[0]) // width_us
    bounds = np.searchsorted(period, np.arange(n_bars + 1))

    of = np.zeros(n_bars)
    wr = np.full(n_bars, np.nan)
    rv = np.full(n_bars, np.nan)
    nv = np.full(n_bars, np.nan)
    direct = np.zeros(n_bars, dtype=bool)
    for b in range(n_bars):
        lo, hi = bounds[b], bounds[b + 1]
        of[b] = order_flow_imbalance(fiat[lo:hi], is_buy[lo:hi])
        if hi == lo:
            continue
        wr[b] = whale_index(buyers[lo:hi], sellers[lo:hi], is_buy[lo:hi])
        try:
            rv[b], nv[b] = period_rv_nv(logp[lo:hi], k=k, preavg_const=preavg_const)
            direct[b] = True
        except InsufficientData:
            pass

    ms = bars["median_rel_spread"].to_numpy(dtype=float)
    missing = ~direct | np.isnan(wr) | np.isnan(ms)
    # carry the last defined value forward; leading rows stay NaN
    wr = pd.Series(wr).ffill().to_numpy()
    ms = pd.Series(ms).ffill().to_numpy()
    rv = pd.Series(rv).ffill().to_numpy()
    nv = pd.Series(nv).ffill().to_numpy()

    jump_here = align_jump_flags(detections, bars, rejected_dates)
    dates = [
        _EPOCH + timedelta(days=int(s // US_PER_DAY)) for s in starts
    ]
    sub = subperiod_labels(dates, subperiod_bounds) + 1

    out = pd.DataFrame(
        {
            "period_start_us": starts,
            "date": dates,
            "subperiod": sub,
            "jump_here": jump_here,
            "jump_next": np.append(jump_here[1:], 0),
            "med_spread": ms,
            "order_flow": of,
            "whale_ratio": wr,
            "med_price": bars["median_price"].to_numpy(dtype=float),
            "rv": rv,
            "nv": nv,
            "volume": bars["volume"].to_numpy(dtype=float),
            "n_traders": bars["unique_traders"].to_numpy(dtype=float),
            "missing": missing,
        },
        columns=list(FEATURE_COLUMNS),
    )
    n_missing = int(missing.sum())
    if n_missing:
        logger.info("flagged %d of %d bars as carried/missing", n_missing, n_bars)
    return out.iloc[:-1].reset_index(drop=True)
