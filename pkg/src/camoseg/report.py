"""Serialize run records: JSON, CSV, a markdown summary, and figures.

Everything except ``timings.json`` is byte-deterministic for identical runs
with mock providers and fixed seeds; wall-clock timings are quarantined in
their own file so the rest of the report can be diffed or golden-tested.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import figures
from .metrics import EvalReport, METRIC_NAMES
from .pipeline import RunRecord

CSV_COLUMNS = (
    "threshold",
    "video",
    "frames",
    "iou",
    "dice",
    "mae",
    "s_measure",
    "e_measure",
    "weighted_f",
    "sr",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def record_to_json_dict(record: RunRecord) -> dict:
    return {
        "tool": "camoseg",
        "version": record.version,
        "config": record.config_snapshot,
        "provider_models": record.provider_models,
        "thresholds": list(record.thresholds),
        "routes": record.routes,
        "reports": {key: rep.to_json_dict() for key, rep in record.reports.items()},
        "best_global_threshold": record.best_global,
        "per_video_best_threshold": record.per_video_best,
        "failures": record.failures,
    }


def write_csv(record: RunRecord, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for key in sorted(record.reports, key=float):
            rep = record.reports[key]
            for vid in sorted(rep.per_video):
                row = rep.per_video[vid]
                writer.writerow(
                    [key, vid, row["frames"]]
                    + [_fmt(row[m]) for m in METRIC_NAMES]
                    + [_fmt(row.get("sr"))]
                )


def _aggregate_table(rep: EvalReport) -> list[str]:
    lines = ["| mode | " + " | ".join(METRIC_NAMES) + " |"]
    lines.append("|" + "---|" * (len(METRIC_NAMES) + 1))
    for mode, values in rep.aggregates.items():
        cells = [_fmt(values.get(m)) if values.get(m) is not None else "n/a" for m in METRIC_NAMES]
        lines.append(f"| {mode} | " + " | ".join(cells) + " |")
    return lines


def write_markdown(record: RunRecord, path: Path) -> None:
    lines: list[str] = []
    lines.append("# camoseg benchmark report")
    lines.append("")
    lines.append(f"- tool version: {record.version}")
    lines.append(f"- provider models: {json.dumps(record.provider_models, sort_keys=True)}")
    first = record.reports[next(iter(sorted(record.reports, key=float)))]
    lines.append(f"- declared aggregation mode: {first.mode.value}")
    lines.append(f"- omit_last_frame: {first.flags.omit_last_frame}")
    lines.append(f"- binarize threshold: {first.flags.binarize_threshold}")
    lines.append(f"- detection-success IoU tau: {first.flags.dsr_tau}")
    lines.append(f"- empty-gt rule: {first.empty_gt_rule}")
    lines.append("")

    lines.append("## Dataset aggregates per threshold")
    lines.append("")
    for key in sorted(record.reports, key=float):
        rep = record.reports[key]
        lines.append(f"### threshold {key}")
        lines.append("")
        lines.extend(_aggregate_table(rep))
        if rep.sr is not None:
            lines.append("")
            lines.append(f"detection success rate (tau {rep.flags.dsr_tau}): {_fmt(rep.sr)}")
        lines.append("")

    lines.append("## Best threshold, two interpretations")
    lines.append("")
    lines.append("Single global threshold per metric:")
    lines.append("")
    lines.append("| metric | threshold | value |")
    lines.append("|---|---|---|")
    for metric, info in record.best_global.items():
        lines.append(f"| {metric} | {info['threshold']} | {_fmt(info['value'])} |")
    lines.append("")
    pvb = record.per_video_best
    lines.append(
        f"Per-video best threshold (IoU), dataset mean: {_fmt(pvb.get('mean_iou'))}"
    )
    lines.append("")

    best_iou = record.best_global.get("iou")
    table_key = best_iou["threshold"] if best_iou else next(iter(sorted(record.reports, key=float)))
    rep = record.reports[table_key]
    lines.append(f"## Per-video results at threshold {table_key}")
    lines.append("")
    lines.append("| video | frames | iou | dice | mae | s_measure | e_measure | weighted_f | sr | best-thr iou (per-video) |")
    lines.append("|---|---|---|---|---|---|---|---|---|---|")
    for vid in sorted(rep.per_video):
        row = rep.per_video[vid]
        best_row = pvb["videos"].get(vid, {})
        best_cell = (
            f"{_fmt(best_row.get('iou'))} @ {best_row.get('threshold')}" if best_row else ""
        )
        lines.append(
            f"| {vid} | {row['frames']} | "
            + " | ".join(_fmt(row[m]) for m in METRIC_NAMES)
            + f" | {_fmt(row.get('sr')) or 'n/a'} | {best_cell} |"
        )
    lines.append("")

    failures = {k: v for k, v in record.failures.items() if v}
    if failures:
        lines.append("## Failures")
        lines.append("")
        for key in sorted(failures, key=float):
            for vid, err in sorted(failures[key].items()):
                lines.append(f"- threshold {key}, {vid}: {err}")
        lines.append("")
    if any(rep.warnings for rep in record.reports.values()):
        lines.append("## Warnings")
        lines.append("")
        for key in sorted(record.reports, key=float):
            for w in record.reports[key].warnings:
                lines.append(f"- threshold {key}: {w}")
        lines.append("")
    path.write_text("\n".join(lines))


def write_figures(record: RunRecord, out_dir: Path) -> list[Path]:
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    keys = sorted(record.reports, key=float)
    thresholds = [float(k) for k in keys]
    agg_mode = record.reports[keys[0]].mode.value
    series: dict[str, list[float]] = {}
    for metric in METRIC_NAMES:
        values = [record.reports[k].aggregates.get(agg_mode, {}).get(metric) for k in keys]
        if all(v is not None for v in values):
            series[metric] = [float(v) for v in values]
    written.append(figures.sweep_curves(thresholds, series, fig_dir / "sweep_metrics.png"))
    best_iou = record.best_global.get("iou")
    table_key = best_iou["threshold"] if best_iou else keys[0]
    rep = record.reports[table_key]
    per_video = {vid: float(row["iou"]) for vid, row in rep.per_video.items()}
    written.append(
        figures.per_video_bars(
            per_video,
            fig_dir / "per_video_miou.png",
            title=f"per-video mIoU at threshold {table_key}",
        )
    )
    return written


def emit_eval(report: EvalReport, out_dir: str | Path, version: str) -> list[Path]:
    """Write a standalone evaluation (no sweep): JSON, CSV, markdown, figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    json_path = out_dir / "eval_report.json"
    payload = {"tool": "camoseg", "version": version, **report.to_json_dict()}
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    written.append(json_path)

    csv_path = out_dir / "per_video.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS[1:])  # no threshold column
        for vid in sorted(report.per_video):
            row = report.per_video[vid]
            writer.writerow(
                [vid, row["frames"]]
                + [_fmt(row[m]) for m in METRIC_NAMES]
                + [_fmt(row.get("sr"))]
            )
    written.append(csv_path)

    md_path = out_dir / "summary.md"
    lines = ["# camoseg evaluation report", ""]
    lines.append(f"- tool version: {version}")
    lines.append(f"- declared aggregation mode: {report.mode.value}")
    lines.append(f"- omit_last_frame: {report.flags.omit_last_frame}")
    lines.append(f"- empty-gt rule: {report.empty_gt_rule}")
    lines.append("")
    lines.extend(_aggregate_table(report))
    if report.sr is not None:
        lines.append("")
        lines.append(f"detection success rate (tau {report.flags.dsr_tau}): {_fmt(report.sr)}")
    if report.warnings:
        lines.append("")
        lines.append("## Warnings")
        lines.extend(f"- {w}" for w in report.warnings)
    lines.append("")
    md_path.write_text("\n".join(lines))
    written.append(md_path)

    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    per_video = {vid: float(row["iou"]) for vid, row in report.per_video.items()}
    written.append(figures.per_video_bars(per_video, fig_dir / "per_video_miou.png"))
    return written


def emit_report(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Write report.json, per_video.csv, summary.md, figures/, timings.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    report_json = out_dir / "report.json"
    report_json.write_text(json.dumps(record_to_json_dict(record), indent=2, sort_keys=True))
    written.append(report_json)

    csv_path = out_dir / "per_video.csv"
    write_csv(record, csv_path)
    written.append(csv_path)

    md_path = out_dir / "summary.md"
    write_markdown(record, md_path)
    written.append(md_path)

    written.extend(write_figures(record, out_dir))

    timings = out_dir / "timings.json"
    timings.write_text(json.dumps(record.timings, indent=2, sort_keys=True))
    written.append(timings)
    return written
