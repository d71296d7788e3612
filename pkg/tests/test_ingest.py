"""Raw-log parsing, leg aggregation, trade cleaning and bounceback removal."""

from dataclasses import replace
from datetime import datetime, timezone

import pandas as pd
import pytest

from tickjump.errors import DataError, MalformedTradeId
from tickjump.ingest import (
    TICK_COLUMNS,
    TickTrade,
    aggregate_legs,
    clean_trades,
    datetime_to_us,
    filter_bouncebacks,
    parse_trade_id,
    read_raw_csv,
    read_ticks,
    ticks_to_frame,
    us_to_datetime,
    write_ticks,
)

from conftest import make_leg


def _tick(seconds, price, micros=0, ident=None):
    tid = seconds * 1_000_000 + micros
    t = datetime.fromtimestamp(seconds, tz=timezone.utc).replace(microsecond=micros)
    return TickTrade(t, ident if ident is not None else tid, "b", "s", "bid", price, 50.0, 50.0 / price)


class TestParseTradeId:
    def test_known_instant(self):
        t = parse_trade_id("1309219920123456")
        assert t == datetime(2011, 6, 28, 0, 12, 0, 123456, tzinfo=timezone.utc)

    def test_zero_microseconds(self):
        t = parse_trade_id("1000000000000000")
        assert t == datetime(2001, 9, 9, 1, 46, 40, tzinfo=timezone.utc)

    def test_too_short(self):
        with pytest.raises(MalformedTradeId):
            parse_trade_id("12345")

    def test_non_digits(self):
        with pytest.raises(MalformedTradeId):
            parse_trade_id("13092199201234ab")

    def test_empty(self):
        with pytest.raises(MalformedTradeId):
            parse_trade_id("")

    def test_injective_and_monotone(self):
        ids = [str(1_309_219_920_000_000 + d) for d in (0, 1, 999_999, 1_000_000, 86_400_000_000)]
        times = [parse_trade_id(i) for i in ids]
        assert len(set(times)) == len(times)
        assert times == sorted(times)

    def test_round_trip_through_us(self):
        t = parse_trade_id("1309219920123456")
        assert us_to_datetime(datetime_to_us(t)) == t
        assert datetime_to_us(t) == 1_309_219_920_123_456


class TestAggregateLegs:
    def test_pairing(self):
        rows = [
            make_leg("1309219920123456", "buy", "alice"),
            make_leg("1309219920123456", "sell", "bob"),
        ]
        pairs, report = aggregate_legs(rows)
        assert len(pairs) == 1
        assert pairs[0].buy.user_id == "alice"
        assert pairs[0].sell.user_id == "bob"
        assert pairs[0].aggressor == "bid"
        assert report.accepted == 2
        assert report.rejected == 0

    def test_duplicate_rows_first_wins(self):
        rows = [
            make_leg("1309219920123456", "buy", "alice", fiat=100.0),
            make_leg("1309219920123456", "buy", "alice2", fiat=200.0),
            make_leg("1309219920123456", "sell", "bob"),
        ]
        pairs, report = aggregate_legs(rows)
        assert len(pairs) == 1
        assert pairs[0].buy.user_id == "alice"
        assert report.rejections == {"duplicate": 1}

    def test_missing_leg(self):
        pairs, report = aggregate_legs([make_leg("1309219920123456", "buy", "alice")])
        assert pairs == []
        assert report.rejections == {"missing-leg": 1}

    def test_self_trade(self):
        rows = [
            make_leg("1309219920123456", "buy", "alice"),
            make_leg("1309219920123456", "sell", "alice"),
        ]
        pairs, report = aggregate_legs(rows)
        assert pairs == []
        assert report.rejections == {"self-trade": 2}

    def test_aggressor_from_sell_leg(self):
        rows = [
            make_leg("1309219920123456", "buy", "alice", aggressor=""),
            make_leg("1309219920123456", "sell", "bob"),
        ]
        rows[1] = replace(rows[1], aggressor="ask")
        pairs, _ = aggregate_legs(rows)
        assert pairs[0].aggressor == "ask"

    def test_missing_aggressor(self):
        rows = [
            make_leg("1309219920123456", "buy", "alice", aggressor=""),
            make_leg("1309219920123456", "sell", "bob"),
        ]
        pairs, report = aggregate_legs(rows)
        assert pairs == []
        assert report.rejections == {"missing-aggressor": 2}

    def test_row_conservation(self):
        rows = [
            make_leg("1309219920123456", "buy", "alice"),
            make_leg("1309219920123456", "sell", "bob"),
            make_leg("1309219921123456", "buy", "carol"),
            make_leg("1309219922123456", "buy", "dave"),
            make_leg("1309219922123456", "sell", "dave"),
            make_leg("1309219922123456", "sell", "dave"),
        ]
        _, report = aggregate_legs(rows)
        assert report.accepted + report.rejected == report.input_count == len(rows)


class TestCleanTrades:
    def _pair(self, tid="1309219920123456", fiat=101.23, btc=10.0, currency="USD", user2="bob"):
        rows = [
            make_leg(tid, "buy", "alice", fiat=fiat, btc=btc, currency=currency),
            make_leg(tid, "sell", user2, fiat=fiat, btc=btc, currency=currency),
        ]
        pairs, _ = aggregate_legs(rows)
        return pairs

    def test_price_rounding(self):
        ticks, report = clean_trades(self._pair(fiat=101.23, btc=10.0))
        assert len(ticks) == 1
        assert ticks[0].price == 10.123
        assert report.accepted == 1

    def test_sub_minimum_fiat(self):
        ticks, report = clean_trades(self._pair(fiat=0.05, btc=0.01))
        assert ticks == []
        assert report.rejections == {"sub-minimum-fiat": 1}

    def test_extreme_price(self):
        ticks, report = clean_trades(self._pair(fiat=12_000.0, btc=1.0))
        assert ticks == []
        assert report.rejections == {"zero-or-extreme-price": 1}

    def test_zero_btc(self):
        ticks, report = clean_trades(self._pair(fiat=10.0, btc=0.0))
        assert ticks == []
        assert report.rejections == {"zero-or-extreme-price": 1}

    def test_non_usd(self):
        ticks, report = clean_trades(self._pair(currency="EUR"))
        assert ticks == []
        assert report.rejections == {"non-USD": 1}

    def test_malformed_id(self):
        ticks, report = clean_trades(self._pair(tid="99999999999"))
        assert len(ticks) == 1  # 11 digits is still a valid encoded id
        ticks, report = clean_trades(self._pair(tid="1234512345"))
        assert ticks == []
        assert report.rejections == {"malformed-id": 1}

    def test_band_filter(self):
        band = {datetime(2011, 6, 28).date(): (9.0, 11.0)}
        ticks, report = clean_trades(self._pair(fiat=140.0, btc=10.0), daily_band=band)
        assert ticks == []
        assert report.rejections == {"outside-high-low-band": 1}
        ticks, report = clean_trades(self._pair(fiat=130.0, btc=10.0), daily_band=band)
        assert len(ticks) == 1  # 13.0 <= 11 * 1.2

    def test_band_other_day_passes(self):
        band = {datetime(2012, 1, 1).date(): (9.0, 11.0)}
        ticks, _ = clean_trades(self._pair(fiat=140.0, btc=10.0), daily_band=band)
        assert len(ticks) == 1

    def test_sorted_output(self):
        pairs = (
            self._pair(tid="1309219930000000")
            + self._pair(tid="1309219920123456")
            + self._pair(tid="1309219920123455")
        )
        ticks, _ = clean_trades(pairs)
        keys = [(t.exec_time, t.trade_id) for t in ticks]
        assert keys == sorted(keys)

    def test_pair_conservation(self):
        pairs = (
            self._pair()
            + self._pair(tid="1309219921123456", fiat=0.05, btc=0.01)
            + self._pair(tid="1309219922123456", currency="EUR")
        )
        _, report = clean_trades(pairs)
        assert report.accepted + report.rejected == report.input_count == len(pairs)


class TestFilterBouncebacks:
    def test_spike_with_full_reversion_removed(self):
        prices = [10.000, 10.001, 12.000, 10.001, 10.002]
        ticks = [_tick(1_356_998_400 + i, p) for i, p in enumerate(prices)]
        kept, report = filter_bouncebacks(ticks)
        assert [t.price for t in kept] == [10.000, 10.001, 10.001, 10.002]
        assert report.rejections == {"bounceback": 1}

    def test_flat_series_unchanged(self):
        ticks = [_tick(1_356_998_400 + i, 10.0) for i in range(50)]
        kept, report = filter_bouncebacks(ticks)
        assert len(kept) == 50
        assert report.rejected == 0

    def test_level_shift_survives(self):
        prices = [10.0] * 20 + [12.0] * 20
        ticks = [_tick(1_356_998_400 + i, p) for i, p in enumerate(prices)]
        kept, _ = filter_bouncebacks(ticks)
        assert [t.price for t in kept] == prices

    def test_endpoints_never_dropped(self):
        prices = [15.0, 10.001, 10.000, 10.001, 15.0]
        ticks = [_tick(1_356_998_400 + i, p) for i, p in enumerate(prices)]
        kept, _ = filter_bouncebacks(ticks)
        assert kept[0].price == 15.0
        assert kept[-1].price == 15.0

    def test_partial_reversion_survives(self):
        # Spike that only reverts half-way is not a bounceback.
        prices = [10.000, 10.001, 12.000, 11.000, 10.001, 10.002, 10.001, 10.002]
        ticks = [_tick(1_356_998_400 + i, p) for i, p in enumerate(prices)]
        kept, _ = filter_bouncebacks(ticks)
        assert len(kept) == len(prices)

    def test_tick_conservation(self):
        prices = [10.000, 10.001, 12.000, 10.001, 10.002]
        ticks = [_tick(1_356_998_400 + i, p) for i, p in enumerate(prices)]
        kept, report = filter_bouncebacks(ticks)
        assert report.accepted + report.rejected == report.input_count == len(ticks)
        assert report.accepted == len(kept)

    def test_short_series_passthrough(self):
        ticks = [_tick(1_356_998_400, 10.0), _tick(1_356_998_401, 99.0)]
        kept, _ = filter_bouncebacks(ticks)
        assert len(kept) == 2


class TestIO:
    def test_frame_round_trip(self, tmp_path):
        prices = [10.0, 10.5, 11.0]
        ticks = [_tick(1_356_998_400 + i, p, micros=i) for i, p in enumerate(prices)]
        frame = ticks_to_frame(ticks)
        assert tuple(frame.columns) == TICK_COLUMNS
        path = str(tmp_path / "ticks.csv")
        write_ticks(frame, path)
        back = read_ticks(path)
        pd.testing.assert_frame_equal(back, frame[list(TICK_COLUMNS)])

    def test_read_ticks_sorts(self, tmp_path):
        ticks = [_tick(1_356_998_401, 11.0), _tick(1_356_998_400, 10.0)]
        frame = ticks_to_frame(ticks)
        path = str(tmp_path / "ticks.csv")
        write_ticks(frame, path)
        back = read_ticks(path)
        assert list(back["time_us"]) == sorted(back["time_us"])

    def test_read_ticks_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time_us,price\n1,10.0\n")
        with pytest.raises(DataError):
            read_ticks(str(path))

    def test_read_raw_csv(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text(
            "trade_id,side,user_id,currency,fiat,btc,time,aggressor\n"
            "1309219920123456,BUY,alice,USD,101.23,10.0,x,bid\n"
            "1309219920123456,sell,bob,USD,101.23,10.0,x,\n"
        )
        rows = read_raw_csv(str(path))
        assert len(rows) == 2
        assert rows[0].side == "buy"
        assert rows[0].fiat_amount == 101.23
        assert rows[1].aggressor == ""
        pairs, _ = aggregate_legs(rows)
        ticks, _ = clean_trades(pairs)
        assert len(ticks) == 1 and ticks[0].price == 10.123

    def test_read_raw_csv_headerless_indices(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("1309219920123456,buy,alice,USD,101.23,10.0\n")
        rows = read_raw_csv(
            str(path),
            column_map={
                "trade_id": 0,
                "side": 1,
                "user_id": 2,
                "currency": 3,
                "fiat_amount": 4,
                "btc_amount": 5,
            },
            has_header=False,
        )
        assert len(rows) == 1
        assert rows[0].trade_id == "1309219920123456"
        assert rows[0].btc_amount == 10.0


def test_filter_preserves_kept_ticks_exactly():
    prices = [10.000, 10.001, 12.000, 10.001, 10.002]
    ticks = [_tick(1_356_998_400 + i, p) for i, p in enumerate(prices)]
    kept, _ = filter_bouncebacks(ticks)
    survivors = [t for t in ticks if t.price != 12.000]
    assert kept == survivors
