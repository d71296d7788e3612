"""Post-jump impact analysis.

For each detected jump, market-activity statistics are computed on four
consecutive 15-minute spans after the detection window and compared, via
log-ratios, against a 15-minute reference window one hour before the
detection start.  A one-sample t-test across jumps asks whether the
typical log-ratio differs from zero.  Jumps whose windows leave the
sample, or whose reference value is zero or undefined, are excluded and
counted rather than imputed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from . import estimators
from .errors import DegenerateVariance, InsufficientData
from .features import order_flow_imbalance, whale_index
from .series import US_PER_MIN, build_quotes

logger = logging.getLogger(__name__)

# Statistics in reporting order.
DEFAULT_STATISTICS = (
    "rv",
    "nv",
    "order_flow",
    "volume",
    "n_traders",
    "med_spread",
    "med_price",
    "whale_ratio",
)

# Post-detection spans in minutes relative to the detection window's end.
SPANS_MIN = ((0, 15), (15, 30), (30, 45), (45, 60))
REFERENCE_MIN = (-60, -45)  # relative to the detection window's start
GROUPS = ("all", "positive", "negative")


@dataclass(frozen=True)
class ImpactCell:
    t_stat: float
    p_value: float
    n: int
    n_excluded: int


@dataclass(frozen=True)
class ImpactReport:
    statistics: tuple[str, ...]
    spans_min: tuple[tuple[int, int], ...]
    cells: dict
    n_detections: dict
    boundary_skipped: dict

    def cell(self, statistic: str, span: int, group: str = "all") -> ImpactCell:
        return self.cells[(statistic, span, group)]


@dataclass(frozen=True)
class PriceProfile:
    group: str
    offsets_min: np.ndarray
    median_norm_price: np.ndarray
    n_per_tranche: np.ndarray
    n_jumps: int


def _window_stats(
    logp: np.ndarray,
    fiat: np.ndarray,
    price: np.ndarray,
    buyers: np.ndarray,
    sellers: np.ndarray,
    is_buy: np.ndarray,
    rel_spread: np.ndarray,
    k: int,
) -> dict[str, float]:
    """All impact statistics on one tick slice; NaN where undefined."""
    out = dict.fromkeys(DEFAULT_STATISTICS, math.nan)
    n = len(logp)
    out["order_flow"] = order_flow_imbalance(fiat, is_buy)
    out["volume"] = float(fiat.sum()) if n else 0.0
    if n == 0:
        return out
    out["n_traders"] = float(len(set(buyers) | set(sellers)))
    out["med_price"] = float(np.median(price))
    out["whale_ratio"] = whale_index(buyers, sellers, is_buy)
    finite_spreads = rel_spread[np.isfinite(rel_spread)]
    if len(finite_spreads):
        out["med_spread"] = float(np.median(finite_spreads))
    if n > k:
        out["nv"] = estimators.noise_variance(logp, k).q2
    try:
        out["rv"] = estimators.robust_volatility(logp, k=k, min_blocks=4).sigma2T
    except (InsufficientData, DegenerateVariance):
        pass
    return out


def _zero_mean_ttest(ratios: np.ndarray) -> tuple[float, float]:
    if len(ratios) < 2:
        return math.nan, math.nan
    if np.ptp(ratios) == 0.0:
        # degenerate sample: identically zero ratios are exactly null
        if ratios[0] == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, ratios[0]), 0.0
    res = stats.ttest_1samp(ratios, 0.0)
    return float(res.statistic), float(res.pvalue)


def impact_ttests(
    detections,
    frame: pd.DataFrame,
    statistics: tuple[str, ...] = DEFAULT_STATISTICS,
    k: int = 4,
) -> ImpactReport:
    """Log-ratio t-tests of post-jump versus pre-jump activity.

    Ratios require positive finite values on both sides; jumps failing
    that for a statistic are excluded from that cell only, while jumps
    whose windows cross the sample boundary are excluded everywhere.
    Exclusions are reported per cell so counts always reconcile.
    """
    times = frame["time_us"].to_numpy(dtype=np.int64)
    price = frame["price"].to_numpy(dtype=float)
    logp = np.log(price)
    fiat = frame["fiat"].to_numpy(dtype=float)
    buyers = frame["buyer_id"].to_numpy()
    sellers = frame["seller_id"].to_numpy()
    is_buy = frame["aggressor"].to_numpy() == "bid"
    rel_spread = build_quotes(frame["aggressor"].to_numpy(), price).rel_spread()

    def window(lo_us: int, hi_us: int) -> dict[str, float]:
        lo = int(np.searchsorted(times, lo_us, side="left"))
        hi = int(np.searchsorted(times, hi_us, side="left"))
        return _window_stats(
            logp[lo:hi],
            fiat[lo:hi],
            price[lo:hi],
            buyers[lo:hi],
            sellers[lo:hi],
            is_buy[lo:hi],
            rel_spread[lo:hi],
            k,
        )

    ratios: dict = {
        (s, sp, g): [] for s in statistics for sp in range(len(SPANS_MIN)) for g in GROUPS
    }
    totals = dict.fromkeys(GROUPS, 0)
    skipped = dict.fromkeys(GROUPS, 0)
    for det in detections:
        groups = ("all", "positive" if det.jump_size > 0 else "negative")
        for g in groups:
            totals[g] += 1
        ref_start = det.loc_start + REFERENCE_MIN[0] * US_PER_MIN
        last_end = det.loc_end + SPANS_MIN[-1][1] * US_PER_MIN
        if ref_start < times[0] or last_end > times[-1]:
            for g in groups:
                skipped[g] += 1
            logger.info("skipping jump on %s: windows leave the sample", det.date)
            continue
        ref = window(ref_start, det.loc_start + REFERENCE_MIN[1] * US_PER_MIN)
        for sp, (a, b) in enumerate(SPANS_MIN):
            post = window(det.loc_end + a * US_PER_MIN, det.loc_end + b * US_PER_MIN)
            for s in statistics:
                num, den = post[s], ref[s]
                if num > 0 and den > 0 and math.isfinite(num) and math.isfinite(den):
                    for g in groups:
                        ratios[(s, sp, g)].append(math.log(num / den))

    cells = {}
    for key, values in ratios.items():
        arr = np.asarray(values, dtype=float)
        t, p = _zero_mean_ttest(arr)
        group = key[2]
        cells[key] = ImpactCell(
            t_stat=t, p_value=p, n=len(arr), n_excluded=totals[group] - len(arr)
        )
    return ImpactReport(
        statistics=tuple(statistics),
        spans_min=SPANS_MIN,
        cells=cells,
        n_detections=totals,
        boundary_skipped=skipped,
    )


def price_profiles(
    detections,
    bars: pd.DataFrame,
    pre_minutes: int = 30,
    post_minutes: int = 60,
) -> dict[str, PriceProfile]:
    """Median normalized price path around jumps, split by jump sign.

    Each jump's bar prices are normalized by the bar 30 minutes before
    the detection start, so the base tranche is exactly 1; tranches
    outside the sample are skipped per jump.
    """
    starts = bars["period_start_us"].to_numpy(dtype=np.int64)
    prices = bars["median_price"].to_numpy(dtype=float)
    if len(starts) < 2:
        raise InsufficientData("need a bar grid to build profiles")
    width_us = int(starts[1] - starts[0])
    width_min = width_us // US_PER_MIN
    offsets = np.arange(-pre_minutes, post_minutes + width_min, width_min)
    base_slot = 0  # first tranche is the normalization base
    paths: dict[str, list[np.ndarray]] = {"positive": [], "negative": []}
    for det in detections:
        group = "positive" if det.jump_size > 0 else "negative"
        anchor = (det.loc_start - starts[0]) // width_us
        idx = anchor + offsets // width_min
        valid = (idx >= 0) & (idx < len(starts))
        if not valid[base_slot]:
            continue
        base = prices[idx[base_slot]]
        if not base > 0:
            continue
        path = np.full(len(offsets), np.nan)
        path[valid] = prices[idx[valid]] / base
        paths[group].append(path)

    out: dict[str, PriceProfile] = {}
    for group, rows in paths.items():
        if rows:
            stacked = np.vstack(rows)
            med = np.nanmedian(stacked, axis=0)
            counts = np.sum(~np.isnan(stacked), axis=0)
        else:
            med = np.full(len(offsets), np.nan)
            counts = np.zeros(len(offsets), dtype=int)
        out[group] = PriceProfile(
            group=group,
            offsets_min=offsets.copy(),
            median_norm_price=med,
            n_per_tranche=counts,
            n_jumps=len(rows),
        )
    return out
