"""Figure rendering for the report path.

Renders the plot-ready frames produced by the table module to PNG files.
Uses the non-interactive backend so it runs headless; files are written
via a temporary name and an atomic rename.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

logger = logging.getLogger(__name__)

_DPI = 150


def _save(fig, path: Path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    # the temp suffix hides the real one, so pass the format explicitly
    fig.savefig(tmp, dpi=_DPI, bbox_inches="tight", format=path.suffix.lstrip("."))
    plt.close(fig)
    os.replace(tmp, path)
    logger.info("wrote %s", path)
    return path


def save_jump_sizes(det_frame: pd.DataFrame, path) -> Path:
    """Detected jump sizes over time plus their histogram."""
    fig, (ax_t, ax_h) = plt.subplots(2, 1, figsize=(8, 6), height_ratios=[2, 1])
    sizes_pct = 100.0 * det_frame["jump_size"]
    ax_t.stem(det_frame["date"], sizes_pct, basefmt=" ", markerfmt="o")
    ax_t.axhline(0.0, color="black", lw=0.8)
    ax_t.set_ylabel("jump size (%)")
    ax_h.hist(sizes_pct, bins=30, color="steelblue", edgecolor="white")
    ax_h.set_xlabel("jump size (%)")
    ax_h.set_ylabel("count")
    fig.suptitle("Detected jumps")
    return _save(fig, path)


def save_pvalues(pv_frame: pd.DataFrame, path) -> Path:
    """Daily test p-values with the selection threshold."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.scatter(pv_frame["date"], pv_frame["p_value"], s=8, alpha=0.6)
    thr = pv_frame["threshold_p"].iloc[0] if len(pv_frame) else 0.0
    if thr > 0:
        ax.axhline(thr, color="crimson", lw=1.0, label=f"threshold {thr:.3g}")
        ax.legend(loc="upper right")
    ax.set_yscale("symlog", linthresh=1e-8)
    ax.set_ylabel("daily p-value")
    ax.set_title("Daily jump-test p-values")
    return _save(fig, path)


def save_quarterly(counts_frame: pd.DataFrame, path) -> Path:
    """Detections per calendar quarter."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(counts_frame["quarter"], counts_frame["n_jumps"], color="steelblue")
    ax.set_ylabel("detections")
    ax.set_title("Detections per quarter")
    ax.tick_params(axis="x", rotation=45)
    return _save(fig, path)


def save_factor_dynamics(features: pd.DataFrame, columns, path) -> Path:
    """Daily means of selected covariates over the sample."""
    daily = features.groupby("date")[list(columns)].mean()
    fig, axes = plt.subplots(
        len(columns), 1, figsize=(8, 2.2 * len(columns)), sharex=True
    )
    if len(columns) == 1:
        axes = [axes]
    for ax, col in zip(axes, columns):
        ax.plot(daily.index, daily[col], lw=0.8)
        ax.set_ylabel(col)
    axes[-1].set_xlabel("date")
    fig.suptitle("Covariate dynamics (daily means)")
    return _save(fig, path)


def save_profiles(profile_frame: pd.DataFrame, path) -> Path:
    """Median normalized price around jumps, per sign group."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for group, part in profile_frame.groupby("group"):
        ax.plot(
            part["offset_min"],
            part["median_norm_price"],
            marker="o",
            ms=3,
            label=f"{group} (n={int(part['n_jumps'].max()) if len(part) else 0})",
        )
    ax.axvline(0.0, color="black", lw=0.8, ls="--")
    ax.axhline(1.0, color="black", lw=0.8)
    ax.set_xlabel("minutes from detection start")
    ax.set_ylabel("median normalized price")
    ax.set_title("Price path around jumps")
    ax.legend()
    return _save(fig, path)
