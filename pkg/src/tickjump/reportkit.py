"""Table formatting for the analysis outputs.

Rendering is pure: cells carry already-computed values plus a format code
and the name of the module that produced them.  Text and CSV emit the
formatted strings; JSON emits the raw values so a render/parse round
trip is lossless.  Conventions: percent and t-statistic columns use two
decimals, p-values use two decimals with "<0.01" flooring, undefined
values print as a dash.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np
import pandas as pd

from .errors import ConfigError

DASH = "-"


@dataclass(frozen=True)
class Cell:
    value: object  # number, string, or None for absent
    fmt: str = "g"  # int | dec2 | pct2 | p2 | sci | text | g
    provenance: str = ""


@dataclass(frozen=True)
class TableSpec:
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    footnote: str = ""

    def validate(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ConfigError(
                    f"ragged table '{self.title}': row of {len(row)} cells, "
                    f"{len(self.columns)} columns"
                )


def format_cell(cell: Cell) -> str:
    v = cell.value
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return DASH
    if cell.fmt == "text":
        return str(v)
    if cell.fmt == "int":
        return str(int(v))
    if cell.fmt == "dec2":
        return f"{v:.2f}"
    if cell.fmt == "pct2":
        return f"{100.0 * v:.2f}%"
    if cell.fmt == "p2":
        return "<0.01" if v < 0.01 else f"{v:.2f}"
    if cell.fmt == "sci":
        return f"{v:.4g}"
    if cell.fmt == "g":
        return str(v)
    raise ConfigError(f"unknown cell format {cell.fmt!r}")


def render_table(spec: TableSpec, fmt: str = "text") -> str:
    spec.validate()
    if fmt == "text":
        return _render_text(spec)
    if fmt == "csv":
        return _render_csv(spec)
    if fmt == "json":
        return _render_json(spec)
    raise ConfigError(f"unknown table format {fmt!r}")


def _render_text(spec: TableSpec) -> str:
    grid = [list(spec.columns)] + [
        [format_cell(c) for c in row] for row in spec.rows
    ]
    widths = [max(len(r[j]) for r in grid) for j in range(len(spec.columns))]

    def line(parts, pad):
        cells = [parts[0].ljust(widths[0])] + [
            p.rjust(w) for p, w in zip(parts[1:], widths[1:])
        ]
        return pad.join(cells).rstrip()

    out = [spec.title, line(grid[0], "  "), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    out += [line(r, "  ") for r in grid[1:]]
    if spec.footnote:
        out += ["", spec.footnote]
    return "\n".join(out) + "\n"


def _render_csv(spec: TableSpec) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(spec.columns)
    for row in spec.rows:
        writer.writerow([format_cell(c) for c in row])
    return buf.getvalue()


def _render_json(spec: TableSpec) -> str:
    def raw(v):
        if v is None:
            return None
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        if isinstance(v, float) and math.isnan(v):
            return None
        return v

    doc = {
        "title": spec.title,
        "columns": list(spec.columns),
        "footnote": spec.footnote,
        "rows": [
            [
                {"value": raw(c.value), "fmt": c.fmt, "provenance": c.provenance}
                for c in row
            ]
            for row in spec.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _mrow(label: str, cells: list[Cell]) -> tuple[Cell, ...]:
    return tuple([Cell(label, "text")] + cells)


def build_summary_table(summary: dict) -> TableSpec:
    """Jump-size descriptives, one column per sign group.

    Sizes are log-price moves shown as percent; an empty group renders
    as a zero count with dashes.
    """
    src = "multiplicity"
    order = ("all", "positive", "negative")
    groups = [summary[g] for g in order]
    stats_rows = (
        ("N", "count", "int"),
        ("Mean", "mean", "pct2"),
        ("Mean abs.", "mean_abs", "pct2"),
        ("Median abs.", "median_abs", "pct2"),
        ("Max", "maximum", "pct2"),
        ("Min", "minimum", "pct2"),
        ("Std. dev.", "std", "pct2"),
        ("Skewness", "skewness", "dec2"),
        ("Kurtosis", "kurtosis", "dec2"),
    )
    rows = [
        _mrow(label, [Cell(getattr(g, attr), fmt, src) for g in groups])
        for label, attr, fmt in stats_rows
    ]
    return TableSpec(
        title="Jump size summary",
        columns=("Statistic", "All", "Positive", "Negative"),
        rows=tuple(rows),
        footnote="Sizes are log-price increments over the detection window.",
    )


def build_summary_table_or_empty(summary: dict | None) -> TableSpec:
    """Like build_summary_table, tolerating an empty detection set."""
    if summary is not None:
        return build_summary_table(summary)
    empty = SimpleNamespace(
        count=0, mean=None, mean_abs=None, median_abs=None, maximum=None,
        minimum=None, std=None, skewness=None, kurtosis=None,
    )
    return build_summary_table({g: empty for g in ("all", "positive", "negative")})


def build_runs_table(results: dict) -> TableSpec:
    """Runs-test results, one column per labeled period.

    A None result (degenerate period: one category absent) renders as a
    dash column.
    """
    src = "multiplicity"
    labels = list(results)
    fields = (
        ("Jump days", "n_jump_days", "int"),
        ("Quiet days", "n_quiet_days", "int"),
        ("Runs", "runs_observed", "int"),
        ("z", "z", "dec2"),
        ("p-value", "p_value", "p2"),
    )
    rows = [
        _mrow(lab, [Cell(getattr(results[k], attr, None), fmt, src) for k in labels])
        for lab, attr, fmt in fields
    ]
    return TableSpec(
        title="Runs test of detection clustering",
        columns=("Statistic",) + tuple(labels),
        rows=tuple(rows),
    )


def build_probit_table(panels: dict) -> TableSpec:
    """Coefficients, standard errors, marginal effects and fit statistics.

    ``panels`` maps a column label to (fit, marginals, diagnostics).
    Coefficients absent from a panel (for example fixed effects in a
    pooled fit) render as dashes.
    """
    src = "probit"
    labels = list(panels)
    names: list[str] = []
    for fit, _, _ in panels.values():
        for nm in fit.column_names:
            if nm not in names:
                names.append(nm)

    rows = []
    for nm in names:
        coefs, ses, margs = [], [], []
        for fit, marginals, _ in panels.values():
            if nm in fit.column_names:
                j = fit.column_names.index(nm)
                coefs.append(Cell(float(fit.coefficients[j]), "dec2", src))
                ses.append(Cell(float(fit.std_errors[j]), "dec2", src))
            else:
                coefs.append(Cell(None, "dec2", src))
                ses.append(Cell(None, "dec2", src))
            m = marginals.get(nm) if marginals else None
            margs.append(Cell(m, "pct2", src))
        rows.append(_mrow(nm, coefs))
        rows.append(_mrow(f"  se({nm})", ses))
        if any(c.value is not None for c in margs):
            rows.append(_mrow(f"  dP({nm})", margs))
    rows.append(
        _mrow(
            "Adj. pseudo-R2",
            [Cell(d.adjusted_pseudo_r2, "dec2", src) for _, _, d in panels.values()],
        )
    )
    rows.append(
        _mrow("LR p-value", [Cell(d.lr_pvalue, "p2", src) for _, _, d in panels.values()])
    )
    rows.append(
        _mrow("N", [Cell(f.n_obs, "int", src) for f, _, _ in panels.values()])
    )
    return TableSpec(
        title="Probit model of next-period jump occurrence",
        columns=("Coefficient",) + tuple(labels),
        rows=tuple(rows),
        footnote="dP rows: probability change for a one-SD covariate move.",
    )


def build_impact_table(report, group: str = "all") -> TableSpec:
    """t-statistics and p-values of post-jump log-ratios, per span."""
    src = "eventstudy"
    span_labels = tuple(f"{a}-{b} min" for a, b in report.spans_min)
    pretty = {
        "rv": "Realized variance",
        "nv": "Noise variance",
        "order_flow": "Abs. order flow",
        "volume": "Volume",
        "n_traders": "Num. traders",
        "med_spread": "Med. spread",
        "med_price": "Med. price",
        "whale_ratio": "Whale ratio",
    }
    rows = []
    for stat in report.statistics:
        cells_t, cells_p, cells_n = [], [], []
        for sp in range(len(report.spans_min)):
            cell = report.cell(stat, sp, group)
            cells_t.append(Cell(cell.t_stat, "dec2", src))
            cells_p.append(Cell(cell.p_value, "p2", src))
            cells_n.append(Cell(cell.n, "int", src))
        rows.append(_mrow(pretty.get(stat, stat), cells_t))
        rows.append(_mrow("  p-value", cells_p))
        rows.append(_mrow("  N", cells_n))
    return TableSpec(
        title=f"Post-jump activity versus pre-jump reference ({group} jumps)",
        columns=("Statistic",) + span_labels,
        rows=tuple(rows),
        footnote=(
            "t-tests of mean log-ratio against the 15-minute window one "
            "hour before detection."
        ),
    )


def jump_size_frame(detections) -> pd.DataFrame:
    """Plot-ready detection list: date, size, p-value, window."""
    return pd.DataFrame(
        {
            "date": [d.date for d in detections],
            "jump_size": [d.jump_size for d in detections],
            "p_value": [d.p_value for d in detections],
            "loc_start_us": [d.loc_start for d in detections],
            "loc_end_us": [d.loc_end for d in detections],
        }
    )


def pvalue_frame(detections, threshold_p: float) -> pd.DataFrame:
    """Daily p-value series with the selection threshold attached."""
    frame = pd.DataFrame(
        {
            "date": [d.date for d in detections],
            "p_value": [d.p_value for d in detections],
        }
    ).sort_values("date", kind="stable")
    frame["threshold_p"] = threshold_p
    return frame.reset_index(drop=True)


def quarterly_counts_frame(rejected_dates) -> pd.DataFrame:
    """Detections per calendar quarter."""
    if not rejected_dates:
        return pd.DataFrame(columns=["quarter", "n_jumps"])
    s = pd.Series(sorted(pd.Timestamp(d) for d in rejected_dates))
    counts = s.groupby(s.dt.to_period("Q")).size()
    return pd.DataFrame(
        {"quarter": counts.index.astype(str), "n_jumps": counts.to_numpy()}
    )


def profile_frame(profiles: dict) -> pd.DataFrame:
    """Long-format normalized price profiles, one row per group x tranche."""
    parts = []
    for group, prof in profiles.items():
        parts.append(
            pd.DataFrame(
                {
                    "group": group,
                    "offset_min": prof.offsets_min,
                    "median_norm_price": prof.median_norm_price,
                    "n_jumps": prof.n_per_tranche,
                }
            )
        )
    return pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(
        columns=["group", "offset_min", "median_norm_price", "n_jumps"]
    )
