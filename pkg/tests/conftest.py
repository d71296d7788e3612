"""Shared builders for synthetic tick frames and raw trade legs."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from tickjump.ingest import TICK_COLUMNS, RawTradeRow


def make_frame(
    prices,
    start_us: int = 1_356_998_400_000_000,  # 2013-01-01T00:00:00Z
    spacing_us: int = 1_000_000,
    aggressors=None,
    buyers=None,
    sellers=None,
    fiat=None,
) -> pd.DataFrame:
    """Canonical tick frame with simple defaults for every column."""
    prices = np.asarray(prices, dtype=float)
    n = len(prices)
    times = start_us + spacing_us * np.arange(n, dtype=np.int64)
    if aggressors is None:
        aggressors = np.where(np.arange(n) % 2 == 0, "bid", "ask")
    if buyers is None:
        buyers = np.array([f"b{i % 7}" for i in range(n)])
    if sellers is None:
        sellers = np.array([f"s{i % 5}" for i in range(n)])
    fiat = np.full(n, 50.0) if fiat is None else np.asarray(fiat, dtype=float)
    frame = pd.DataFrame(
        {
            "time_us": times,
            "trade_id": times,
            "buyer_id": buyers,
            "seller_id": sellers,
            "aggressor": aggressors,
            "price": prices,
            "fiat": fiat,
            "btc": fiat / prices,
        }
    )
    return frame[list(TICK_COLUMNS)]


def make_leg(
    trade_id: str,
    side: str,
    user: str,
    fiat: float = 100.0,
    btc: float = 1.0,
    currency: str = "USD",
    aggressor: str = "bid",
) -> RawTradeRow:
    return RawTradeRow(
        trade_id=trade_id,
        side=side,
        user_id=user,
        currency=currency,
        fiat_amount=fiat,
        btc_amount=btc,
        aggressor=aggressor if side == "buy" else "",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20130101)
