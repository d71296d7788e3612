"""Noise-robust intraday jump detection and analysis for tick data.

The pipeline: ingest raw trade legs into canonical ticks, test each day
for a price jump with a pre-averaged maximum-increment statistic, select
jump days under false-discovery-rate control, build per-period covariates
and a probit model of jump predictability, and measure post-jump market
activity against pre-jump references.  A seeded simulator generates
synthetic tick days with ground truth for validation.
"""

from .errors import (
    ConfigError,
    DataError,
    DegenerateSequence,
    DegenerateVariance,
    InsufficientData,
    MalformedTradeId,
    MissingValue,
    NonConvergence,
    NumericalError,
    RankDeficientDesign,
    TickjumpError,
)
from .estimators import (
    NoiseEstimate,
    VolEstimate,
    asymptotic_variance,
    block_means,
    block_size,
    noise_variance,
    robust_volatility,
)
from .eventstudy import ImpactReport, PriceProfile, impact_ttests, price_profiles
from .features import (
    align_jump_flags,
    build_features,
    order_flow_imbalance,
    period_rv_nv,
    whale_index,
)
from .ingest import (
    CleaningReport,
    PairedTrade,
    RawTradeRow,
    TickTrade,
    aggregate_legs,
    clean_trades,
    filter_bouncebacks,
    parse_trade_id,
    read_raw_csv,
    read_ticks,
    ticks_to_frame,
    write_ticks,
)
from .jumptest import JumpDetection, JumpTestConfig, lm_statistic, preaverage, test_day
from .multiplicity import (
    FdrResult,
    RunsTestResult,
    fdr_select,
    jump_summary,
    runs_test,
)
from .probit import (
    ProbitFit,
    fit_diagnostics,
    fit_probit,
    marginal_probabilities,
)
from .series import (
    DaySeries,
    QuoteSeries,
    build_bars,
    build_quotes,
    day_series,
    split_days,
)
from .simkit import (
    JumpSizeModel,
    SimDay,
    SimScenario,
    oracle_runs_pvalue,
    simulate_day,
    simulate_logprices,
    simulate_panel,
)

__version__ = "0.1.0"

__all__ = [
    "CleaningReport",
    "ConfigError",
    "DataError",
    "DaySeries",
    "DegenerateSequence",
    "DegenerateVariance",
    "FdrResult",
    "ImpactReport",
    "InsufficientData",
    "JumpDetection",
    "JumpSizeModel",
    "JumpTestConfig",
    "MalformedTradeId",
    "MissingValue",
    "NoiseEstimate",
    "NonConvergence",
    "NumericalError",
    "PairedTrade",
    "PriceProfile",
    "ProbitFit",
    "QuoteSeries",
    "RankDeficientDesign",
    "RawTradeRow",
    "RunsTestResult",
    "SimDay",
    "SimScenario",
    "TickTrade",
    "TickjumpError",
    "VolEstimate",
    "aggregate_legs",
    "align_jump_flags",
    "asymptotic_variance",
    "block_means",
    "block_size",
    "build_bars",
    "build_features",
    "build_quotes",
    "clean_trades",
    "day_series",
    "fdr_select",
    "filter_bouncebacks",
    "fit_diagnostics",
    "fit_probit",
    "impact_ttests",
    "jump_summary",
    "lm_statistic",
    "marginal_probabilities",
    "noise_variance",
    "oracle_runs_pvalue",
    "order_flow_imbalance",
    "parse_trade_id",
    "period_rv_nv",
    "preaverage",
    "price_profiles",
    "read_raw_csv",
    "read_ticks",
    "robust_volatility",
    "runs_test",
    "simulate_day",
    "simulate_logprices",
    "simulate_panel",
    "split_days",
    "test_day",
    "ticks_to_frame",
    "whale_index",
    "write_ticks",
]
