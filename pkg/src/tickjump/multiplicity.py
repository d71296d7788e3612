"""Cross-day multiplicity control and detection-set descriptives.

Daily p-values form one family per sample; selection uses the
Benjamini-Hochberg step-up, which bounds the expected fraction of false
detections at the target q under (near-)independence of daily statistics.
Also provides summary statistics of the selected jump sizes and a
Wald-Wolfowitz runs test for temporal clustering of detections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date

import numpy as np
from scipy import stats

from .errors import ConfigError, DegenerateSequence, InsufficientData

# Sub-period boundaries for grouped analyses: three equal spans of the
# 888-day reference sample (each 296 days).
DEFAULT_SUBPERIOD_BOUNDS: tuple[Date, Date] = (Date(2012, 4, 17), Date(2013, 2, 7))

# Below this many flags the runs-count null distribution is evaluated
# exactly; the normal approximation is poor enough there to matter.
EXACT_RUNS_MAX = 20


@dataclass(frozen=True)
class FdrResult:
    q_target: float
    threshold_p: float  # largest rejected p, 0.0 when nothing is rejected
    rejected_dates: frozenset

    @property
    def n_rejected(self) -> int:
        return len(self.rejected_dates)


@dataclass(frozen=True)
class RunsTestResult:
    n_jump_days: int
    n_quiet_days: int
    runs_observed: int
    z: float
    p_value: float


def fdr_select(p_values, q: float = 0.10) -> FdrResult:
    """Benjamini-Hochberg step-up over a family of per-day p-values.

    ``p_values`` is a mapping from day label to p-value, or a plain
    sequence (labels are then positions).  Rejects every day whose p is
    at or below the largest p_(i) satisfying p_(i) <= i q / m.
    """
    if not 0.0 < q < 1.0:
        raise ConfigError(f"FDR target q = {q} outside (0, 1)")
    if hasattr(p_values, "items"):
        labels, pvals = zip(*p_values.items()) if p_values else ((), ())
    else:
        pvals = tuple(p_values)
        labels = tuple(range(len(pvals)))
    p = np.asarray(pvals, dtype=float)
    if p.size and (np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p))):
        raise ConfigError("p-values must lie in [0, 1]")

    m = p.size
    threshold = 0.0
    if m:
        order = np.argsort(p, kind="stable")
        crit = q * (np.arange(1, m + 1) / m)
        passing = np.nonzero(p[order] <= crit)[0]
        if passing.size:
            threshold = float(p[order][passing[-1]])
    rejected = frozenset(lab for lab, pv in zip(labels, p) if pv <= threshold and m)
    return FdrResult(q_target=q, threshold_p=threshold, rejected_dates=rejected)


@dataclass(frozen=True)
class SummaryGroup:
    """Descriptives of one group of signed jump sizes.

    Higher moments that are undefined at the group's size (or under zero
    dispersion) are None; renderers show them as dashes.
    """

    label: str
    count: int
    mean: float | None
    mean_abs: float | None
    median_abs: float | None
    maximum: float | None
    minimum: float | None
    std: float | None
    skewness: float | None
    kurtosis: float | None


def _group(label: str, sizes: np.ndarray) -> SummaryGroup:
    n = sizes.size
    if n == 0:
        return SummaryGroup(label, 0, None, None, None, None, None, None, None, None)

    def _moment(value: float) -> float | None:
        return None if not math.isfinite(value) else float(value)

    std = _moment(sizes.std(ddof=1)) if n >= 2 else None
    skew = _moment(stats.skew(sizes, bias=False)) if n >= 3 and std else None
    kurt = _moment(stats.kurtosis(sizes, bias=False)) if n >= 4 and std else None
    return SummaryGroup(
        label=label,
        count=n,
        mean=float(sizes.mean()),
        mean_abs=float(np.abs(sizes).mean()),
        median_abs=float(np.median(np.abs(sizes))),
        maximum=float(sizes.max()),
        minimum=float(sizes.min()),
        std=std,
        skewness=skew,
        kurtosis=kurt,
    )


def jump_summary(sizes) -> dict[str, SummaryGroup]:
    """Size descriptives over all detections and split by sign.

    Kurtosis is excess (normal = 0); skewness and kurtosis are the
    bias-corrected sample versions.
    """
    arr = np.asarray(sizes, dtype=float)
    if arr.size == 0:
        raise InsufficientData("summary needs at least one detection")
    return {
        "all": _group("all", arr),
        "positive": _group("positive", arr[arr > 0]),
        "negative": _group("negative", arr[arr < 0]),
    }


def _exact_runs_pvalue(n1: int, n2: int, r_obs: int, mean_r: float) -> float:
    """Two-sided tail of the exact runs-count distribution.

    P(R = 2s) = 2 C(n1-1, s-1) C(n2-1, s-1) / C(n, n1) and the odd-count
    analog; the tail collects every count at least as far from the mean
    as the observed one.
    """
    n = n1 + n2
    total = math.comb(n, n1)
    dev = abs(r_obs - mean_r)
    tail = 0
    for r in range(2, n + 1):
        if abs(r - mean_r) < dev - 1e-12:
            continue
        s, odd = divmod(r, 2)
        if odd:
            ways = math.comb(n1 - 1, s) * math.comb(n2 - 1, s - 1) + math.comb(
                n1 - 1, s - 1
            ) * math.comb(n2 - 1, s)
        else:
            ways = 2 * math.comb(n1 - 1, s - 1) * math.comb(n2 - 1, s - 1)
        tail += ways
    return tail / total


def runs_test(day_flags) -> RunsTestResult:
    """Wald-Wolfowitz runs test on an ordered binary day sequence.

    z is always the normal-approximation statistic.  For short sequences
    (fewer than EXACT_RUNS_MAX flags) the p-value comes from the exact
    runs-count distribution, since the normal tail is unreliable there;
    longer sequences use the normal two-sided tail.
    """
    flags = np.asarray(day_flags).astype(bool)
    n = flags.size
    n1 = int(flags.sum())
    n2 = n - n1
    if n1 == 0 or n2 == 0:
        raise DegenerateSequence("runs test needs both jump and quiet days")

    runs = 1 + int(np.count_nonzero(flags[1:] != flags[:-1]))
    mean_r = 1.0 + 2.0 * n1 * n2 / n
    var_r = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    z = (runs - mean_r) / math.sqrt(var_r) if var_r > 0 else math.nan

    if n < EXACT_RUNS_MAX:
        p = _exact_runs_pvalue(n1, n2, runs, mean_r)
    else:
        p = 2.0 * stats.norm.sf(abs(z))
    return RunsTestResult(
        n_jump_days=n1,
        n_quiet_days=n2,
        runs_observed=runs,
        z=float(z),
        p_value=float(min(1.0, p)),
    )


def subperiod_labels(dates, bounds: tuple[Date, Date] | None = None) -> np.ndarray:
    """Indices 0/1/2 assigning each date to a sub-period.

    Bounds are the first days of the second and third spans; None uses
    the reference sample's split.
    """
    lo, hi = bounds or DEFAULT_SUBPERIOD_BOUNDS
    if not lo < hi:
        raise ConfigError("sub-period bounds must be increasing")
    out = np.zeros(len(dates), dtype=np.int64)
    for i, d in enumerate(dates):
        out[i] = 0 if d < lo else (1 if d < hi else 2)
    return out
