"""Pre-averaged maximum-increment jump test for one day of noisy ticks.

Block means of every k-th observation suppress both noise (averaging) and
its serial dependence (subsampling).  Under the no-jump null the largest
absolute increment between consecutive block means, scaled by
sqrt(M)/sqrt(V), has a Gumbel limit after centering with A_n and scaling
with B_n, the extreme-value constants for the maximum of ``n/(kM)``
folded standard normals.  A jump shows up as an outlying increment, which
also localizes it to a two-block window.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import date as Date

import numpy as np

from . import estimators
from .errors import DegenerateVariance, InsufficientData

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JumpTestConfig:
    """Tuning constants of the daily jump test.

    ``block_const`` (C) sets the pre-averaging block length
    M = floor(C sqrt(n/k)); ``variance_const`` (c) is the matching constant
    in the asymptotic variance (2/3) c^2 sigma^2 T + 2 q^2.  The two refer
    to the same quantity and should stay equal; both are exposed for
    sensitivity runs.
    """

    k: int = 4
    block_const: float = 0.2
    variance_const: float = 0.2
    min_blocks: int = 30

    def block_len(self, n: int) -> int:
        M = estimators.block_size(n, self.k, self.block_const)
        if self.k * M >= n:
            raise InsufficientData(f"block span k*M = {self.k * M} exceeds n = {n}")
        return M

    def min_ticks(self, n: int) -> int:
        """Smallest day (in ticks) the test will attempt: 10 increments."""
        return 2 * self.k * self.block_len(n) * 10


@dataclass(frozen=True)
class JumpDetection:
    """Outcome of the daily test; at most one (the largest) jump per day."""

    date: Date | None
    statistic_std: float  # Gumbel-scale standardized maximum
    p_value: float
    loc_start: int  # window containing the detected move (time units of the input)
    loc_end: int
    jump_size: float  # signed log-price increment at the argmax
    n: int  # ticks used


def gumbel_constants(n_blocks: int) -> tuple[float, float]:
    """Centering A_n and scale B_n for the max of n_blocks folded normals."""
    two_log = 2.0 * math.log(n_blocks)
    root = math.sqrt(two_log)
    a_n = root - (math.log(math.pi) + math.log(math.log(n_blocks))) / (2.0 * root)
    return a_n, 1.0 / root


def _logp_times(day) -> tuple[np.ndarray, np.ndarray, Date | None]:
    if hasattr(day, "log_prices"):
        return (
            np.asarray(day.log_prices, dtype=float),
            np.asarray(day.times, dtype=np.int64),
            day.date,
        )
    logp = np.asarray(day, dtype=float)
    return logp, np.arange(len(logp), dtype=np.int64), None


def preaverage(day, cfg: JumpTestConfig) -> tuple[np.ndarray, np.ndarray]:
    """Block-mean series (t_j, Phat_j) for j = 0, kM, 2kM, ...

    t_j is the instant of the block's first tick.  Needs at least two full
    blocks; the trailing partial block is dropped.
    """
    logp, times, _ = _logp_times(day)
    M = cfg.block_len(len(logp))
    if len(logp) < 2 * cfg.k * M:
        raise InsufficientData(
            f"{len(logp)} ticks hold fewer than two blocks of {cfg.k * M}"
        )
    phat = estimators.block_means(logp, cfg.k, M)
    starts = times[: len(phat) * cfg.k * M : cfg.k * M]
    return starts, phat


def lm_statistic(day, cfg: JumpTestConfig, variance: float) -> JumpDetection:
    """Standardized maximum pre-averaged increment and its Gumbel p-value.

    The localization window spans the two blocks forming the maximal
    increment (a jump inside either block produces the same extreme), so
    loc_end is the last tick instant of the second block.
    """
    if not variance > 0:
        raise DegenerateVariance(f"asymptotic variance {variance} must be positive")
    logp, times, day_date = _logp_times(day)
    n = len(logp)
    M = cfg.block_len(n)
    kM = cfg.k * M
    n_blocks = n // kM
    if n_blocks < 2:
        raise InsufficientData(f"{n} ticks hold fewer than two blocks of {kM}")
    phat = estimators.block_means(logp, cfg.k, M)
    increments = np.diff(phat)

    a_n, b_n = gumbel_constants(n_blocks)
    j_star = int(np.argmax(np.abs(increments)))
    raw_max = abs(float(increments[j_star]))
    standardized = (math.sqrt(M) * raw_max / math.sqrt(variance) - a_n) / b_n
    p_value = float(-np.expm1(-np.exp(-standardized)))

    loc_start = int(times[j_star * kM])
    loc_end = int(times[(j_star + 2) * kM - cfg.k])
    return JumpDetection(
        date=day_date,
        statistic_std=float(standardized),
        p_value=p_value,
        loc_start=loc_start,
        loc_end=loc_end,
        jump_size=float(increments[j_star]),
        n=n,
    )


def test_day(day, cfg: JumpTestConfig | None = None) -> JumpDetection:
    """Full daily test: noise variance, robust volatility, then the maximum
    increment against its Gumbel null.

    Deterministic given the inputs and config.  Days thinner than ten
    increments (or too thin for the volatility estimator) raise
    InsufficientData and should be reported as untested rather than quiet.
    """
    cfg = cfg or JumpTestConfig()
    logp, _, _ = _logp_times(day)
    n = len(logp)
    if n < 2 * cfg.k:
        raise InsufficientData(f"day has {n} ticks")
    if n < cfg.min_ticks(n):
        raise InsufficientData(f"day has {n} ticks, need {cfg.min_ticks(n)}")
    noise = estimators.noise_variance(logp, cfg.k)
    vol = estimators.robust_volatility(
        logp,
        k=cfg.k,
        preavg_const=cfg.block_const,
        min_blocks=cfg.min_blocks,
    )
    variance = estimators.asymptotic_variance(vol, noise, cfg.variance_const)
    return lm_statistic(day, cfg, variance)
