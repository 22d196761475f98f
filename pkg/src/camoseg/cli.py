"""Command-line interface.

Exit codes: 0 on success, 1 on fatal configuration/runtime errors, 2 when a
run completed but some videos failed.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import __version__
from .config import PipelineConfig, list_presets, load_preset, parse_value, resolve_config
from .datasets import discover_videos, load_ground_truth, save_mask_series
from .errors import CamosegError, ConfigError
from .metrics import AggregationMode, EvalFlags, binarize, evaluate_dataset
from .pipeline import run_sweep, run_video
from .report import emit_eval, emit_report
from .synth.datasetgen import write_dataset
from .video import MaskSeries


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = parse_value(value)
    return overrides


def _load_config(config: str | None, preset: str | None, set_: tuple[str, ...]) -> PipelineConfig:
    return resolve_config(
        config_file=config, preset=preset, overrides=_parse_overrides(set_)
    )


config_option = click.option("--config", type=click.Path(), default=None, help="Config file with dotted keys.")
preset_option = click.option("--preset", default=None, help="Named preset (see 'camoseg presets list').")
set_option = click.option(
    "--set", "-o", "set_", multiple=True, metavar="KEY=VALUE", help="Override a config key."
)


@click.group()
@click.version_option(version=__version__, prog_name="camoseg")
def main() -> None:
    """Zero-shot segmentation of camouflaged moving objects in video."""


@main.command()
@click.option("--video", required=True, type=click.Path(exists=True), help="Video directory.")
@click.option("--out", required=True, type=click.Path(), help="Output directory for masks.")
@click.option("--threshold", type=float, default=None, help="Detector threshold override.")
@config_option
@preset_option
@set_option
def run(video: str, out: str, threshold: float | None, config, preset, set_) -> None:
    """Segment one video and write its predicted masks as PNGs."""
    try:
        cfg = _load_config(config, preset, set_)
        result = run_video(cfg, video, threshold=threshold)
    except CamosegError as exc:
        raise click.ClickException(str(exc)) from exc
    mask_dir = Path(out) / result.video_id
    save_mask_series(result.masks, mask_dir)
    detected = sum(1 for d in result.detections.values() if d is not None)
    click.echo(
        f"{result.video_id}: route={result.route}, detections on {detected} frame(s), "
        f"masks on {len(result.masks)} frame(s) -> {mask_dir}"
    )


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True), help="Dataset root.")
@click.option("--out", required=True, type=click.Path(), help="Report output directory.")
@config_option
@preset_option
@set_option
def bench(data: str, out: str, config, preset, set_) -> None:
    """Run the full pipeline over a dataset with the threshold sweep and report."""
    try:
        cfg = _load_config(config, preset, set_)
        record = run_sweep(cfg, data)
    except CamosegError as exc:
        raise click.ClickException(str(exc)) from exc
    paths = emit_report(record, out)
    click.echo(f"wrote {len(paths)} report files under {out}")
    for metric, info in record.best_global.items():
        click.echo(f"  best {metric}: {info['value']:.4f} at threshold {info['threshold']}")
    n_failures = sum(len(v) for v in record.failures.values())
    if n_failures:
        click.echo(f"{n_failures} per-video failure(s); see summary.md", err=True)
        sys.exit(2)


@main.command("eval")
@click.option("--pred", required=True, type=click.Path(exists=True), help="Prediction root (one subdir of mask PNGs per video).")
@click.option("--gt", "gt_root", required=True, type=click.Path(exists=True), help="Dataset root with ground truth.")
@click.option("--out", required=True, type=click.Path(), help="Report output directory.")
@click.option("--agg-mode", type=click.Choice([m.value for m in AggregationMode]), default="frame_then_video")
@click.option("--omit-last-frame", is_flag=True, default=False)
@click.option("--bin-threshold", type=float, default=0.5)
@click.option("--dsr-tau", type=float, default=0.5)
@config_option
@preset_option
@set_option
def eval_cmd(pred, gt_root, out, agg_mode, omit_last_frame, bin_threshold, dsr_tau, config, preset, set_) -> None:
    """Score an existing prediction directory against dataset ground truth."""
    try:
        cfg = _load_config(config, preset, set_)
        flags = EvalFlags(
            mode=AggregationMode(agg_mode),
            omit_last_frame=omit_last_frame,
            binarize_threshold=bin_threshold,
            dsr_tau=dsr_tau,
        )
        gts = {}
        preds = {}
        for video_dir in discover_videos(gt_root, cfg.io.imgs_subdir):
            vid = video_dir.name
            gts[vid] = load_ground_truth(
                video_dir / cfg.io.gt_subdir, stride_hint=cfg.io.gt_stride, video_id=vid
            )
            pred_dir = Path(pred) / vid
            if pred_dir.is_dir():
                preds[vid] = _load_soft_predictions(pred_dir, vid, bin_threshold)
        if not gts:
            raise ConfigError(f"no videos with ground truth under {gt_root}")
        report = evaluate_dataset(preds, gts, flags)
    except CamosegError as exc:
        raise click.ClickException(str(exc)) from exc
    paths = emit_eval(report, out, version=__version__)
    click.echo(f"wrote {len(paths)} report files under {out}")
    declared = report.aggregates[agg_mode]
    click.echo("  " + ", ".join(f"{k}={v:.4f}" for k, v in declared.items()))
    if report.warnings:
        click.echo(f"{len(report.warnings)} warning(s); see eval_report.json", err=True)
        sys.exit(2)


def _load_soft_predictions(pred_dir: Path, vid: str, threshold: float) -> MaskSeries:
    """Prediction PNGs may be soft gray maps; binarize at the given threshold."""
    masks = {}
    for path in sorted(pred_dir.iterdir()):
        if path.suffix.lower() not in (".png", ".jpg", ".jpeg", ".bmp"):
            continue
        digits = "".join(ch for ch in path.stem if ch.isdigit())
        if not digits:
            continue
        with Image.open(path) as img:
            soft = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
        masks[int(digits)] = binarize(soft, threshold)
    return MaskSeries(masks, video_id=vid)


@main.command()
@click.option("--out", required=True, type=click.Path(), help="Dataset output root.")
@click.option("--videos", type=int, default=10, show_default=True)
@click.option("--frames", type=int, default=30, show_default=True)
@click.option("--size", type=int, default=128, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--gt-stride", type=int, default=1, show_default=True)
@click.option("--distractors", is_flag=True, default=False, help="Add stationary distractor objects.")
def synth(out, videos, frames, size, seed, gt_stride, distractors) -> None:
    """Generate a synthetic camouflaged-motion dataset in the benchmark layout."""
    try:
        dirs = write_dataset(
            out,
            videos=videos,
            frames=frames,
            size=size,
            seed=seed,
            gt_stride=gt_stride,
            with_distractors=distractors,
        )
    except CamosegError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {len(dirs)} videos under {out}")


@main.group()
def presets() -> None:
    """Inspect the shipped ablation presets."""


@presets.command("list")
def presets_list() -> None:
    """List preset names and the keys each one sets."""
    base = PipelineConfig().snapshot()
    for name in list_presets():
        cfg = load_preset(name).snapshot()
        changed = {k: v for k, v in cfg.items() if base[k] != v}
        desc = ", ".join(f"{k}={v}" for k, v in sorted(changed.items()))
        click.echo(f"{name}: {desc if desc else '(defaults)'}")


if __name__ == "__main__":
    main()
