"""Pipeline command-line interface.

Stages communicate through text artifacts in the output directory
(canonical ticks, detection table, selection result, feature matrix,
fit and impact reports), so each stage can be re-run independently and
outputs are auditable.  Every file is written to a temporary name and
renamed, leaving no partial artifacts on failure.

Exit codes: 0 success, 2 configuration, 3 data, 4 numerical.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import date as Date
from pathlib import Path

import numpy as np
import pandas as pd

from . import (
    __version__,
    eventstudy,
    features,
    ingest,
    jumptest,
    multiplicity,
    reportkit,
    series,
    simkit,
)
from .config import PipelineConfig, apply_overrides, config_from_mapping, load_config
from .errors import ConfigError, DataError, InsufficientData, NumericalError
from .errors import DegenerateSequence, DegenerateVariance

logger = logging.getLogger(__name__)

TICKS_FILE = "ticks.csv"
CLEANING_FILE = "cleaning_report.json"
DETECTIONS_FILE = "detections.csv"
FDR_FILE = "fdr.json"
REJECTED_FILE = "rejected.csv"
FEATURES_FILE = "features.csv"
PROBIT_JSON = "probit.json"
PROBIT_TABLE = "probit_table.txt"
IMPACT_JSON = "impact.json"
IMPACT_TABLE = "impact_table.txt"
PROFILES_FILE = "profiles.csv"
TRUTH_FILE = "truth.csv"
REPORT_FILE = "report.txt"

DETECTION_COLUMNS = (
    "date",
    "status",
    "n_ticks",
    "statistic_std",
    "p_value",
    "loc_start_us",
    "loc_end_us",
    "jump_size",
)


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    logger.info("wrote %s", path)


def _write_text(path: Path, text: str) -> None:
    _atomic_write(path, lambda tmp: Path(tmp).write_text(text))


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_frame(path: Path, frame: pd.DataFrame) -> None:
    _atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False))


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- stages


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    if not cfg.input_paths:
        raise ConfigError("ingest needs at least one --input raw trade file")
    out = _out(cfg)
    band = ingest.read_band_csv(cfg.band_path) if cfg.band_path else None

    rows = []
    for path in cfg.input_paths:
        rows.extend(ingest.read_raw_csv(path, has_header=not args.no_header))
    pairs, agg_report = ingest.aggregate_legs(rows)
    ticks, clean_report = ingest.clean_trades(pairs, daily_band=band)
    ticks, bounce_report = ingest.filter_bouncebacks(ticks)

    frame = ingest.ticks_to_frame(ticks)
    _atomic_write(out / TICKS_FILE, lambda tmp: ingest.write_ticks(frame, tmp))
    _write_json(
        out / CLEANING_FILE,
        {
            "stages": [
                agg_report.as_dict(),
                clean_report.as_dict(),
                bounce_report.as_dict(),
            ]
        },
    )
    print(f"ingest: {len(ticks)} ticks from {agg_report.input_count} raw rows")
    return 0


def _detect_one(day_and_frame, cfg_jump):
    day, day_frame = day_and_frame
    row = {"date": day.isoformat(), "status": "ok", "n_ticks": len(day_frame)}
    try:
        det = jumptest.test_day(series.day_series(day_frame), cfg_jump)
        row.update(
            statistic_std=det.statistic_std,
            p_value=det.p_value,
            loc_start_us=det.loc_start,
            loc_end_us=det.loc_end,
            jump_size=det.jump_size,
        )
    except InsufficientData as exc:
        row["status"] = "insufficient-data"
        logger.info("%s: %s", day, exc)
    except DegenerateVariance as exc:
        row["status"] = "degenerate-variance"
        logger.info("%s: %s", day, exc)
    return row


def cmd_detect(args, cfg: PipelineConfig) -> int:
    out = _out(cfg)
    ticks_path = args.input or out / TICKS_FILE
    frame = ingest.read_ticks(ticks_path)
    if frame.empty:
        raise DataError(f"no ticks in {ticks_path}")
    days = series.split_days(frame)
    cfg_jump = cfg.jump_config()
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda d: _detect_one(d, cfg_jump), days))
    else:
        rows = [_detect_one(d, cfg_jump) for d in days]
    table = pd.DataFrame(rows, columns=list(DETECTION_COLUMNS))
    _write_frame(out / DETECTIONS_FILE, table)
    tested = int((table["status"] == "ok").sum())
    print(f"detect: {tested} of {len(table)} days tested")
    return 0


def _read_detections(path) -> pd.DataFrame:
    table = pd.read_csv(path)
    missing = [c for c in DETECTION_COLUMNS if c not in table.columns]
    if missing:
        raise DataError(f"detection table {path} lacks columns: {missing}")
    table["date"] = [Date.fromisoformat(str(d)) for d in table["date"]]
    return table


def _detection_objects(table: pd.DataFrame, keep_dates=None) -> list:
    dets = []
    for row in table.itertuples():
        if row.status != "ok":
            continue
        if keep_dates is not None and row.date not in keep_dates:
            continue
        dets.append(
            jumptest.JumpDetection(
                date=row.date,
                statistic_std=float(row.statistic_std),
                p_value=float(row.p_value),
                loc_start=int(row.loc_start_us),
                loc_end=int(row.loc_end_us),
                jump_size=float(row.jump_size),
                n=int(row.n_ticks),
            )
        )
    return dets


def cmd_fdr(args, cfg: PipelineConfig) -> int:
    out = _out(cfg)
    table = _read_detections(args.input or out / DETECTIONS_FILE)
    ok = table[table["status"] == "ok"]
    result = multiplicity.fdr_select(
        dict(zip(ok["date"], ok["p_value"])), q=cfg.fdr_q
    )
    _write_json(
        out / FDR_FILE,
        {
            "q_target": result.q_target,
            "threshold_p": result.threshold_p,
            "n_tested": int(len(ok)),
            "n_rejected": result.n_rejected,
            "rejected_dates": sorted(d.isoformat() for d in result.rejected_dates),
        },
    )
    rejected = ok[[d in result.rejected_dates for d in ok["date"]]]
    _write_frame(out / REJECTED_FILE, rejected)
    print(f"fdr: {result.n_rejected} of {len(ok)} days rejected at q={result.q_target}")
    return 0


def _read_fdr(path) -> tuple[float, set]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read selection result {path}: {exc}") from exc
    dates = {Date.fromisoformat(d) for d in doc["rejected_dates"]}
    return float(doc["threshold_p"]), dates


def cmd_features(args, cfg: PipelineConfig) -> int:
    out = _out(cfg)
    frame = ingest.read_ticks(args.input or out / TICKS_FILE)
    table = _read_detections(args.detections or out / DETECTIONS_FILE)
    _, rejected = _read_fdr(args.fdr_file or out / FDR_FILE)
    dets = _detection_objects(table)
    matrix = features.build_features(
        frame,
        detections=dets,
        rejected_dates=rejected,
        bar_width=cfg.bar_width,
        k=cfg.k,
        preavg_const=cfg.preavg_const,
        subperiod_bounds=cfg.subperiod_bounds,
    )
    _write_frame(out / FEATURES_FILE, matrix)
    print(f"features: {len(matrix)} rows, {int(matrix['jump_next'].sum())} jump labels")
    return 0


def _read_features(path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if "missing" not in frame.columns:
        raise DataError(f"feature matrix {path} lacks a 'missing' column")
    if frame["missing"].dtype == object:
        frame["missing"] = frame["missing"].map({"True": True, "False": False})
    frame["date"] = [Date.fromisoformat(str(d)) for d in frame["date"]]
    return frame


def cmd_probit(args, cfg: PipelineConfig) -> int:
    from . import probit

    out = _out(cfg)
    matrix = _read_features(args.input or out / FEATURES_FILE)
    panels = {}
    doc = {}
    for label, use_fe in (("with_fe", True), ("without_fe", False)):
        fit = probit.fit_probit(matrix, include_fixed_effects=use_fe)
        marg = probit.marginal_probabilities(fit)
        diag = probit.fit_diagnostics(fit)
        panels[label] = (fit, marg, diag)
        doc[label] = {
            "columns": list(fit.column_names),
            "coefficients": [float(c) for c in fit.coefficients],
            "std_errors": [float(s) for s in fit.std_errors],
            "p_values": [float(p) for p in fit.p_values],
            "marginal_probabilities": {k: float(v) for k, v in marg.items()},
            "log_likelihood": fit.log_likelihood,
            "log_likelihood_null": fit.log_likelihood_null,
            "pseudo_r2": diag.pseudo_r2,
            "adjusted_pseudo_r2": diag.adjusted_pseudo_r2,
            "lr_statistic": diag.lr_statistic,
            "lr_pvalue": diag.lr_pvalue,
            "n_obs": fit.n_obs,
            "iterations": fit.iterations,
        }
    _write_json(out / PROBIT_JSON, doc)
    spec = reportkit.build_probit_table(panels)
    _write_text(out / PROBIT_TABLE, reportkit.render_table(spec, "text"))
    r2 = doc["with_fe"]["adjusted_pseudo_r2"]
    print(f"probit: fit both panels; adjusted pseudo-R2 (FE) = {r2:.4f}")
    return 0


def cmd_impact(args, cfg: PipelineConfig) -> int:
    out = _out(cfg)
    frame = ingest.read_ticks(args.input or out / TICKS_FILE)
    table = _read_detections(args.detections or out / DETECTIONS_FILE)
    _, rejected = _read_fdr(args.fdr_file or out / FDR_FILE)
    dets = _detection_objects(table, keep_dates=rejected)
    if not dets:
        raise DataError("no selected detections; run fdr first or lower q")

    report = eventstudy.impact_ttests(dets, frame, k=cfg.k)
    doc = {
        "n_detections": report.n_detections,
        "boundary_skipped": report.boundary_skipped,
        "spans_min": [list(s) for s in report.spans_min],
        "cells": {
            group: {
                stat: [
                    {
                        "t": report.cell(stat, sp, group).t_stat,
                        "p": report.cell(stat, sp, group).p_value,
                        "n": report.cell(stat, sp, group).n,
                        "n_excluded": report.cell(stat, sp, group).n_excluded,
                    }
                    for sp in range(len(report.spans_min))
                ]
                for stat in report.statistics
            }
            for group in eventstudy.GROUPS
        },
    }
    _write_json(out / IMPACT_JSON, doc)
    text = "".join(
        reportkit.render_table(reportkit.build_impact_table(report, g), "text") + "\n"
        for g in eventstudy.GROUPS
    )
    _write_text(out / IMPACT_TABLE, text)

    bars = series.build_bars(frame, width_minutes=cfg.bar_width)
    profiles = eventstudy.price_profiles(dets, bars)
    _write_frame(out / PROFILES_FILE, reportkit.profile_frame(profiles))
    print(f"impact: {report.n_detections['all']} detections, "
          f"{report.boundary_skipped['all']} skipped at boundaries")
    return 0


def cmd_simulate(args, cfg: PipelineConfig) -> int:
    out = _out(cfg)
    scen = dict(cfg.scenario)
    if cfg.scenario_path:
        extra = load_config(cfg.scenario_path)
        scen.update(extra.scenario)
    null_days = int(scen.pop("null_days", 1))
    jump_days = int(scen.pop("jump_days", 0))
    size_keys = {"size_log_mean", "size_log_sd", "positive_share"}
    size_model = simkit.JumpSizeModel(
        **{
            {"size_log_mean": "log_mean", "size_log_sd": "log_sd",
             "positive_share": "positive_share"}[k]: scen.pop(k)
            for k in list(scen)
            if k in size_keys
        }
    )
    if "start_date" in scen:
        scen["date"] = Date.fromisoformat(str(scen.pop("start_date")))
    scen.setdefault("seed", cfg.seed)
    try:
        template = simkit.SimScenario(**scen)
    except TypeError as exc:
        raise ConfigError(f"bad scenario: {exc}") from exc

    panel = simkit.simulate_panel(null_days, jump_days, template, size_model)
    amounts_rng = np.random.default_rng(np.random.SeedSequence([template.seed, 915]))
    frames = [simkit.to_frame(day, amounts_rng) for day in panel]
    _write_frame(out / TICKS_FILE, pd.concat(frames, ignore_index=True))
    truth = pd.DataFrame(
        {
            "date": [d.series.date.isoformat() for d in panel],
            "n_ticks": [d.series.n for d in panel],
            "has_jump": [int(d.has_jump) for d in panel],
            "jump_time_us": [
                int(d.true_jump_times[0]) if d.has_jump else "" for d in panel
            ],
            "jump_size": [
                float(d.true_jump_sizes[0]) if d.has_jump else "" for d in panel
            ],
            "sigma2t": [d.true_sigma2t for d in panel],
            "q2": [d.true_q2 for d in panel],
        }
    )
    _write_frame(out / TRUTH_FILE, truth)
    print(f"simulate: {len(panel)} days ({jump_days} with jumps) under seed {template.seed}")
    return 0


def cmd_report(args, cfg: PipelineConfig) -> int:
    from . import figures

    out = _out(cfg)
    det_path = out / DETECTIONS_FILE
    if not det_path.exists():
        raise DataError(f"{det_path} not found; run detect first")
    table = _read_detections(det_path)
    threshold, rejected = _read_fdr(out / FDR_FILE)
    sections = []

    selected = _detection_objects(table, keep_dates=rejected)
    if selected:
        summary = multiplicity.jump_summary([d.jump_size for d in selected])
    else:
        summary = None
    spec1 = reportkit.build_summary_table_or_empty(summary)
    _write_text(out / "table_summary.txt", reportkit.render_table(spec1, "text"))
    _write_text(out / "table_summary.csv", reportkit.render_table(spec1, "csv"))
    _write_text(out / "table_summary.json", reportkit.render_table(spec1, "json"))
    sections.append(reportkit.render_table(spec1, "text"))

    ok = table[table["status"] == "ok"]
    flags = np.array([d in rejected for d in ok["date"]], dtype=bool)
    runs_results: dict[str, object] = {}
    try:
        runs_results["full sample"] = multiplicity.runs_test(flags)
    except DegenerateSequence:
        runs_results["full sample"] = None
    sub = multiplicity.subperiod_labels(list(ok["date"]), cfg.subperiod_bounds)
    for idx, label in enumerate(("early", "middle", "late")):
        mask = sub == idx
        try:
            runs_results[label] = (
                multiplicity.runs_test(flags[mask]) if mask.any() else None
            )
        except DegenerateSequence:
            runs_results[label] = None
    spec2 = reportkit.build_runs_table(runs_results)
    _write_text(out / "table_runs.txt", reportkit.render_table(spec2, "text"))
    _write_text(out / "table_runs.json", reportkit.render_table(spec2, "json"))
    sections.append(reportkit.render_table(spec2, "text"))

    det_frame = reportkit.jump_size_frame(selected)
    _write_frame(out / "fig_jump_sizes.csv", det_frame)
    pv_frame = reportkit.pvalue_frame(_detection_objects(table), threshold)
    _write_frame(out / "fig_pvalues.csv", pv_frame)
    counts = reportkit.quarterly_counts_frame(rejected)
    _write_frame(out / "fig_quarterly.csv", counts)
    if len(det_frame):
        figures.save_jump_sizes(det_frame, out / "fig_jump_sizes.png")
        figures.save_quarterly(counts, out / "fig_quarterly.png")
    if len(pv_frame):
        figures.save_pvalues(pv_frame, out / "fig_pvalues.png")

    feat_path = out / FEATURES_FILE
    if feat_path.exists():
        matrix = _read_features(feat_path)
        cols = ("med_spread", "whale_ratio", "rv", "volume")
        daily = matrix[["date", *cols]]
        _write_frame(out / "fig_factors.csv", daily)
        figures.save_factor_dynamics(matrix, cols, out / "fig_factors.png")

    for name in (PROBIT_TABLE, IMPACT_TABLE):
        path = out / name
        if path.exists():
            sections.append(path.read_text())

    prof_path = out / PROFILES_FILE
    if prof_path.exists():
        prof_frame = pd.read_csv(prof_path)
        if len(prof_frame):
            figures.save_profiles(prof_frame, out / "fig_profiles.png")

    header = (
        f"Jump analysis report\n"
        f"days tested: {len(ok)}   selected: {len(selected)}   "
        f"threshold p: {threshold:.6g}\n\n"
    )
    _write_text(out / REPORT_FILE, header + "\n".join(sections))
    print(f"report: {len(selected)} selected jumps across {len(ok)} tested days")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tickjump",
        description="Noise-robust intraday jump detection and analysis pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline configuration")
    common.add_argument("--output-dir", help="artifact directory (default: out)")
    common.add_argument("--q", type=float, help="FDR target level (default: 0.10)")
    common.add_argument("--bar-width", type=int, help="bar width in minutes (default: 5)")
    common.add_argument("--seed", type=int, help="simulation seed (default: 0)")
    common.add_argument("--threads", type=int, help="worker threads (default: 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="info logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="raw trade legs to canonical ticks")
    p.add_argument("--input", action="append", help="raw trade CSV (repeatable)")
    p.add_argument("--band-file", help="daily low/high reference prices CSV")
    p.add_argument("--no-header", action="store_true", help="raw files lack a header row")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("detect", parents=[common], help="daily jump tests")
    p.add_argument("--input", help="canonical tick file")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fdr", parents=[common], help="select jump days under FDR control")
    p.add_argument("--input", help="detection table")
    p.set_defaults(func=cmd_fdr)

    p = sub.add_parser("features", parents=[common], help="per-period covariate matrix")
    p.add_argument("--input", help="canonical tick file")
    p.add_argument("--detections", help="detection table")
    p.add_argument("--fdr-file", help="selection result")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("probit", parents=[common], help="jump predictability model")
    p.add_argument("--input", help="feature matrix")
    p.set_defaults(func=cmd_probit)

    p = sub.add_parser("impact", parents=[common], help="post-jump event study")
    p.add_argument("--input", help="canonical tick file")
    p.add_argument("--detections", help="detection table")
    p.add_argument("--fdr-file", help="selection result")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("simulate", parents=[common], help="synthetic tick data with ground truth")
    p.add_argument("--input", help="scenario YAML (alternative to --config scenario block)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="tables, plot data and figures")
    p.set_defaults(func=cmd_report)
    return parser


def _configure(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {
        "output_dir": args.output_dir,
        "fdr_q": args.q,
        "bar_width": args.bar_width,
        "seed": args.seed,
        "threads": args.threads,
    }
    if args.command == "ingest":
        if args.input:
            overrides["input_paths"] = tuple(args.input)
        if args.band_file:
            overrides["band_path"] = args.band_file
    if args.command == "simulate" and args.input:
        overrides["scenario_path"] = args.input
    cfg = apply_overrides(cfg, **overrides)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _configure(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
