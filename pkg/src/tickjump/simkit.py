"""Synthetic tick-day generator used as the brute-force oracle.

Latent log price: an arithmetic random walk on an even microsecond grid
(constant volatility within the day) plus optional step jumps.  Observed
log price adds moving-average microstructure noise whose stationary
variance is q^2 and whose dependence spans a configurable number of lags.
Everything is deterministic given the seed, and a day can be re-emitted
in the canonical tick-file format so the full pipeline runs on it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from datetime import date as Date
from datetime import timedelta

import numpy as np

from .errors import ConfigError, DegenerateSequence
from .series import US_PER_DAY, DaySeries

_EPOCH = Date(1970, 1, 1)

# Sign split of detected jumps used for panel generation defaults: 70
# positive out of 124.
DEFAULT_POSITIVE_SHARE = 70.0 / 124.0


@dataclass(frozen=True)
class SimScenario:
    """One day's data-generating process.

    sigma is the daily volatility in log units (variance over the whole
    day is sigma^2); jump_times are day fractions in [0, 1); noise is an
    MA(noise_dependence) process with stationary variance noise_q2.
    """

    n: int = 20_000
    sigma: float = 0.02
    jump_times: tuple[float, ...] = ()
    jump_sizes: tuple[float, ...] = ()
    noise_q2: float = 4e-8
    noise_dependence: int = 3
    seed: int = 0
    date: Date = Date(2013, 1, 1)
    log_p0: float = math.log(100.0)

    def __post_init__(self) -> None:
        if self.n < 100:
            raise ConfigError(f"scenario needs n >= 100 ticks, got {self.n}")
        if self.noise_q2 < 0:
            raise ConfigError(f"noise variance {self.noise_q2} must be >= 0")
        if self.sigma < 0:
            raise ConfigError(f"volatility {self.sigma} must be >= 0")
        if self.noise_dependence < 0:
            raise ConfigError("noise dependence (MA order) must be >= 0")
        if len(self.jump_times) != len(self.jump_sizes):
            raise ConfigError("jump_times and jump_sizes differ in length")
        for tau in self.jump_times:
            if not 0.0 <= tau < 1.0:
                raise ConfigError(f"jump time {tau} outside [0, 1)")


@dataclass(frozen=True)
class SimDay:
    """A simulated day with its ground truth attached."""

    series: DaySeries
    latent: np.ndarray  # jump-inclusive log price before noise
    true_jump_times: np.ndarray  # epoch microseconds of first affected tick
    true_jump_indices: np.ndarray
    true_jump_sizes: np.ndarray
    true_sigma2t: float
    true_q2: float

    @property
    def has_jump(self) -> bool:
        return len(self.true_jump_sizes) > 0


def _day_epoch_us(day: Date) -> int:
    return (day - _EPOCH).days * US_PER_DAY


def _ma_noise(rng: np.random.Generator, n: int, q2: float, order: int) -> np.ndarray:
    """Equal-weight MA(order) noise with stationary variance q2."""
    if q2 == 0.0:
        return np.zeros(n)
    span = order + 1
    eps = rng.standard_normal(n + order)
    return math.sqrt(q2 / span) * np.convolve(eps, np.ones(span), mode="valid")


def _jump_indices(scenario: SimScenario) -> np.ndarray:
    return np.minimum(
        np.ceil(np.asarray(scenario.jump_times, dtype=float) * scenario.n).astype(
            np.int64
        ),
        scenario.n - 1,
    )


def simulate_logprices(
    scenario: SimScenario, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(latent, observed) log-price arrays for a scenario.

    The cheap core of simulate_day, without tick bookkeeping; useful for
    large Monte Carlo panels where only prices matter.
    """
    rng = rng if rng is not None else np.random.default_rng(scenario.seed)
    n = scenario.n
    latent = scenario.log_p0 + np.cumsum(
        scenario.sigma / math.sqrt(n) * rng.standard_normal(n)
    )
    for idx, size in zip(_jump_indices(scenario), scenario.jump_sizes):
        latent[idx:] += size
    noise = _ma_noise(rng, n, scenario.noise_q2, scenario.noise_dependence)
    return latent, latent + noise


def _simulate(scenario: SimScenario, rng: np.random.Generator) -> SimDay:
    n = scenario.n
    step = US_PER_DAY // n
    offsets = step * np.arange(n, dtype=np.int64)
    times = _day_epoch_us(scenario.date) + offsets

    latent, observed = simulate_logprices(scenario, rng)
    indices = _jump_indices(scenario)
    noise = observed - latent

    flags = np.where(rng.random(n) < 0.5, "bid", "ask")
    buyers = np.char.add("u", rng.integers(0, 500, size=n).astype("U4"))
    sellers = np.char.add("u", rng.integers(500, 1000, size=n).astype("U4"))
    series = DaySeries(
        date=scenario.date,
        times=times,
        log_prices=latent + noise,
        aggressor_flags=flags,
        buyer_ids=buyers,
        seller_ids=sellers,
    )
    series.validate()
    return SimDay(
        series=series,
        latent=latent,
        true_jump_times=times[indices] if len(indices) else np.empty(0, dtype=np.int64),
        true_jump_indices=indices,
        true_jump_sizes=np.asarray(scenario.jump_sizes, dtype=float),
        true_sigma2t=scenario.sigma**2,
        true_q2=scenario.noise_q2,
    )


def simulate_day(scenario: SimScenario) -> SimDay:
    """Deterministic per scenario.seed."""
    return _simulate(scenario, np.random.default_rng(scenario.seed))


@dataclass(frozen=True)
class JumpSizeModel:
    """Two-sided lognormal-magnitude jump sizes for panel generation."""

    log_mean: float = -3.7  # median magnitude ~2.5% in log price
    log_sd: float = 0.5
    positive_share: float = DEFAULT_POSITIVE_SHARE
    time_lo: float = 0.1
    time_hi: float = 0.9

    def draw(self, rng: np.random.Generator) -> tuple[float, float]:
        tau = float(rng.uniform(self.time_lo, self.time_hi))
        magnitude = float(rng.lognormal(self.log_mean, self.log_sd))
        sign = 1.0 if rng.random() < self.positive_share else -1.0
        return tau, sign * magnitude


def simulate_panel(
    null_days: int,
    jump_days: int,
    template: SimScenario,
    size_model: JumpSizeModel | None = None,
) -> list[SimDay]:
    """Mixture panel of consecutive dates with labeled ground truth.

    Jump days are placed uniformly at random among the panel's days; each
    day gets an independent child seed so the panel is reproducible from
    template.seed yet days remain independent.
    """
    size_model = size_model or JumpSizeModel()
    total = null_days + jump_days
    if total <= 0:
        raise ConfigError("panel needs at least one day")
    root = np.random.SeedSequence(template.seed)
    placement_rng = np.random.default_rng(root.spawn(1)[0])
    jump_flags = np.zeros(total, dtype=bool)
    jump_flags[placement_rng.choice(total, size=jump_days, replace=False)] = True

    days: list[SimDay] = []
    for i, child in enumerate(root.spawn(total + 1)[1:]):
        rng = np.random.default_rng(child)
        if jump_flags[i]:
            tau, size = size_model.draw(rng)
            jumps = ((tau,), (size,))
        else:
            jumps = ((), ())
        scenario = replace(
            template,
            jump_times=jumps[0],
            jump_sizes=jumps[1],
            date=template.date + timedelta(days=i),
        )
        days.append(_simulate(scenario, rng))
    return days


def to_frame(day: SimDay, rng: np.random.Generator | None = None):
    """Canonical tick frame for the day, pipeline-compatible.

    Prices are rounded to cents-of-a-cent (3 decimals) exactly as the
    ingest stage would produce them; fiat amounts are derived from the
    rounded price so re-ingestion reproduces the same price column.
    """
    import pandas as pd

    from .ingest import TICK_COLUMNS

    rng = rng or np.random.default_rng(0)
    s = day.series
    n = s.n
    seconds, micros = np.divmod(s.times, 1_000_000)
    trade_ids = np.array(
        [f"{sec}{us:06d}" for sec, us in zip(seconds, micros)], dtype=np.int64
    )
    price = np.round(np.exp(s.log_prices), 3)
    btc = np.round(np.exp(rng.normal(-2.0, 1.0, size=n)), 8)
    # keep every trade above the minimum fiat size so cleaning is a no-op
    btc = np.maximum(btc, 0.2 / price)
    fiat = price * btc
    return pd.DataFrame(
        {
            "time_us": s.times,
            "trade_id": trade_ids,
            "buyer_id": s.buyer_ids,
            "seller_id": s.seller_ids,
            "aggressor": s.aggressor_flags,
            "price": price,
            "fiat": fiat,
            "btc": btc,
        },
        columns=list(TICK_COLUMNS),
    )


def oracle_runs_pvalue(flags) -> float:
    """Exact two-sided runs-test p-value by complete enumeration.

    Enumerates every arrangement of the observed numbers of positive and
    negative flags (equally likely under exchangeability), tallies the
    runs-count distribution, and returns P(|R - E[R]| >= |r_obs - E[R]|).
    Feasible for up to ~20 flags; quadratic-time statistics use the
    normal approximation instead.
    """
    signs = np.asarray(flags)
    pos = signs > 0
    n = len(pos)
    n1 = int(pos.sum())
    n2 = n - n1
    if n1 == 0 or n2 == 0:
        raise DegenerateSequence("runs test needs both signs present")
    if n > 20:
        raise ConfigError(f"enumeration oracle capped at 20 flags, got {n}")

    def run_count(arrangement: np.ndarray) -> int:
        return 1 + int(np.count_nonzero(arrangement[1:] != arrangement[:-1]))

    r_obs = run_count(pos)
    counts: dict[int, int] = {}
    for positions in itertools.combinations(range(n), n1):
        arr = np.zeros(n, dtype=bool)
        arr[list(positions)] = True
        r = run_count(arr)
        counts[r] = counts.get(r, 0) + 1
    total = math.comb(n, n1)
    mean_r = 1.0 + 2.0 * n1 * n2 / n
    dev = abs(r_obs - mean_r)
    tail = sum(c for r, c in counts.items() if abs(r - mean_r) >= dev - 1e-12)
    return tail / total
