"""Segmentation and detection metrics with explicit aggregation semantics.

Benchmark numbers in this area are frequently incomparable because papers
average differently and handle empty frames differently. This module makes
both choices explicit:

* Aggregation modes: ``frame_then_video`` (mean over videos of per-video
  frame means, the default), ``frame_pooled`` (mean over all frames ignoring
  video boundaries), and ``pixel_pooled`` (counts pooled over all frames as
  one concatenated image; defined for iou/dice/mae only).
* Empty-ground-truth rule, applied to every similarity metric: (empty gt,
  empty pred) scores 1 and (empty gt, non-empty pred) scores 0; MAE is
  computed normally. The rule is recorded in every report header.

S-measure, E-measure, and weighted F-measure follow their original
formulations, with two pinned details: S-object uses the population standard
deviation, region SSIM uses sample (N-1) variance, and the centroid is the
rounded 0-based weighted mean with the centroid row/column included in the
top-left quadrant. One deliberate deviation: the alignment measure here is
normalized by N rather than the original N-1 so that a perfect prediction
scores exactly 1 and every value stays in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, UnsupportedAggregationError
from .video import BinaryMask, BoundingBox, GroundTruth, MaskSeries

EPS = 1e-20

METRIC_NAMES = ("iou", "dice", "mae", "s_measure", "e_measure", "weighted_f")
POOLABLE_METRICS = frozenset({"iou", "dice", "mae"})

EMPTY_GT_RULE = (
    "empty gt & empty pred -> 1 for similarity metrics (MAE uses the plain mean); "
    "empty gt & non-empty pred -> 0"
)


class AggregationMode(Enum):
    FRAME_THEN_VIDEO = "frame_then_video"
    FRAME_POOLED = "frame_pooled"
    PIXEL_POOLED = "pixel_pooled"


def binarize(soft: np.ndarray, threshold: float = 0.5) -> BinaryMask:
    """Threshold a [0, 1] soft map; values >= threshold become foreground."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    arr = np.asarray(soft, dtype=np.float64)
    return BinaryMask(arr >= threshold)


def _as_bits(mask: BinaryMask | np.ndarray) -> np.ndarray:
    if isinstance(mask, BinaryMask):
        return mask.bits
    return np.asarray(mask).astype(bool)


def _as_soft(pred: BinaryMask | np.ndarray) -> np.ndarray:
    if isinstance(pred, BinaryMask):
        return pred.bits.astype(np.float64)
    arr = np.asarray(pred, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("soft prediction values must lie in [0, 1]")
    return arr


def _check_dims(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"pred {pred.shape} vs gt {gt.shape}")


def frame_iou(pred: BinaryMask, gt: BinaryMask) -> float:
    p, g = _as_bits(pred), _as_bits(gt)
    _check_dims(p, g)
    inter = int((p & g).sum())
    union = int((p | g).sum())
    if not g.any():
        return 1.0 if not p.any() else 0.0
    return inter / union


def frame_dice(pred: BinaryMask, gt: BinaryMask) -> float:
    p, g = _as_bits(pred), _as_bits(gt)
    _check_dims(p, g)
    if not g.any():
        return 1.0 if not p.any() else 0.0
    inter = int((p & g).sum())
    return 2.0 * inter / (int(p.sum()) + int(g.sum()))


def frame_mae(pred: BinaryMask, gt: BinaryMask) -> float:
    p, g = _as_bits(pred), _as_bits(gt)
    _check_dims(p, g)
    return float(np.abs(p.astype(np.float64) - g.astype(np.float64)).mean())


def _object_score(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    x = float(values.mean())
    sigma = float(values.std())  # population std, pinned
    return 2.0 * x / (x * x + 1.0 + sigma + EPS)


def _centroid(gt: np.ndarray) -> tuple[int, int]:
    h, w = gt.shape
    total = gt.sum()
    col_mass = gt.sum(axis=0).astype(np.float64)
    row_mass = gt.sum(axis=1).astype(np.float64)
    cx = int(np.round((col_mass * np.arange(w)).sum() / total))
    cy = int(np.round((row_mass * np.arange(h)).sum() / total))
    return cx, cy


def _region_ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    if n == 0:
        return 0.0
    x = float(p.mean())
    y = float(g.mean())
    sigma_x = float(((p - x) ** 2).sum() / (n - 1 + EPS))
    sigma_y = float(((g - y) ** 2).sum() / (n - 1 + EPS))
    sigma_xy = float(((p - x) * (g - y)).sum() / (n - 1 + EPS))
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0.0:
        return alpha / (beta + EPS)
    if beta == 0.0:
        return 1.0
    return 0.0


def _s_region(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = gt.shape
    cx, cy = _centroid(gt)
    area = float(h * w)
    rows = (slice(0, cy + 1), slice(cy + 1, h))
    cols = (slice(0, cx + 1), slice(cx + 1, w))
    score = 0.0
    for rs in rows:
        for cs in cols:
            gq = gt[rs, cs].astype(np.float64)
            pq = pred[rs, cs]
            weight = gq.size / area
            if gq.size:
                score += weight * _region_ssim(pq, gq)
    return score


def s_measure(pred, gt, alpha: float = 0.5) -> float:
    """Structure measure: alpha * object term + (1 - alpha) * region term."""
    p = _as_soft(pred)
    g = _as_bits(gt)
    _check_dims(p, g)
    if not g.any():
        return 1.0 if float(p.max(initial=0.0)) == 0.0 else 0.0
    if g.all():
        return float(np.clip(p.mean(), 0.0, 1.0))
    u = float(g.mean())
    s_obj = u * _object_score(p[g]) + (1.0 - u) * _object_score((1.0 - p)[~g])
    s_reg = _s_region(p, g)
    return float(np.clip(alpha * s_obj + (1.0 - alpha) * s_reg, 0.0, 1.0))


def e_measure(pred, gt) -> float:
    """Enhanced-alignment measure for binary prediction maps."""
    p = _as_bits(pred).astype(np.float64)
    g = _as_bits(gt)
    _check_dims(p, g)
    if not g.any():
        return 1.0 if p.max(initial=0.0) == 0.0 else 0.0
    if g.all():
        enhanced = p
    else:
        gf = g.astype(np.float64)
        dp = p - p.mean()
        dg = gf - gf.mean()
        align = 2.0 * dg * dp / (dg * dg + dp * dp + EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(np.clip(enhanced.mean(), 0.0, 1.0))


def _gaussian_kernel(size: int = 7, sigma: float = 5.0) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))
    return k / k.sum()


def weighted_f(pred, gt, beta2: float = 1.0) -> float:
    """Weighted F-measure: errors are weighted by how far they sit from the
    annotated object and how much they co-occur with nearby errors."""
    p = _as_soft(pred)
    g = _as_bits(gt)
    _check_dims(p, g)
    if not g.any():
        return 1.0 if float(p.max(initial=0.0)) == 0.0 else 0.0
    if float(p.max()) == 0.0:
        # a total miss scores 0; the raw formula can leak a nonzero recall
        # through border padding of the smoothing kernel
        return 0.0
    gf = g.astype(np.float64)
    err = np.abs(p - gf)
    if (~g).any():
        dist, idx = ndimage.distance_transform_edt(~g, return_indices=True)
        err_t = err.copy()
        err_t[~g] = err[idx[0][~g], idx[1][~g]]
    else:
        dist = np.zeros_like(gf)
        err_t = err.copy()
    smoothed = ndimage.convolve(err_t, _gaussian_kernel(), mode="constant", cval=0.0)
    min_err = np.where(g & (smoothed < err), smoothed, err)
    decay = np.where(g, 1.0, 2.0 - np.exp(np.log(0.5) / 5.0 * dist))
    weighted_err = min_err * decay
    tp_w = float(g.sum()) - float(weighted_err[g].sum())
    fp_w = float(weighted_err[~g].sum())
    recall = 1.0 - float(weighted_err[g].mean())
    precision = tp_w / (tp_w + fp_w + EPS)
    q = (1.0 + beta2) * recall * precision / (recall + beta2 * precision + EPS)
    return float(np.clip(q, 0.0, 1.0))


@dataclass(frozen=True)
class FrameScore:
    """All per-frame metric values plus the raw counts pooled modes need."""

    iou: float
    dice: float
    mae: float
    s_measure: float
    e_measure: float
    weighted_f: float
    inter: int
    union: int
    pred_count: int
    gt_count: int
    pixels: int


def frame_scores(pred: BinaryMask, gt: BinaryMask) -> FrameScore:
    """Score one frame on every metric (binary prediction as a {0,1} map)."""
    p, g = _as_bits(pred), _as_bits(gt)
    _check_dims(p, g)
    inter = int((p & g).sum())
    union = int((p | g).sum())
    return FrameScore(
        iou=frame_iou(pred, gt),
        dice=frame_dice(pred, gt),
        mae=frame_mae(pred, gt),
        s_measure=s_measure(pred, gt),
        e_measure=e_measure(pred, gt),
        weighted_f=weighted_f(pred, gt),
        inter=inter,
        union=union,
        pred_count=int(p.sum()),
        gt_count=int(g.sum()),
        pixels=int(g.size),
    )


def _pooled(scores: Sequence[FrameScore], metric: str) -> float:
    inter = sum(s.inter for s in scores)
    union = sum(s.union for s in scores)
    pred = sum(s.pred_count for s in scores)
    gt = sum(s.gt_count for s in scores)
    pixels = sum(s.pixels for s in scores)
    if metric == "iou":
        if gt == 0:
            return 1.0 if pred == 0 else 0.0
        return inter / union
    if metric == "dice":
        if gt == 0:
            return 1.0 if pred == 0 else 0.0
        return 2.0 * inter / (pred + gt)
    if metric == "mae":
        return (pred + gt - 2 * inter) / pixels
    raise UnsupportedAggregationError(
        f"pixel-pooled aggregation is undefined for {metric!r}; "
        f"poolable metrics: {sorted(POOLABLE_METRICS)}"
    )


def aggregate_metric(
    by_video: Mapping[str, Sequence[FrameScore]],
    mode: AggregationMode,
    metric: str,
) -> float:
    """Dataset-level scalar for one metric under one aggregation mode."""
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}")
    videos = [v for v in by_video.values() if len(v) > 0]
    if not videos:
        raise ValueError("no frames to aggregate")
    if mode is AggregationMode.FRAME_THEN_VIDEO:
        return float(
            np.mean([np.mean([getattr(s, metric) for s in v]) for v in videos])
        )
    if mode is AggregationMode.FRAME_POOLED:
        return float(np.mean([getattr(s, metric) for v in videos for s in v]))
    all_scores = [s for v in videos for s in v]
    return float(_pooled(all_scores, metric))


def aggregate(
    by_video: Mapping[str, Sequence[FrameScore]], mode: AggregationMode
) -> dict[str, float]:
    """All metrics supported by the mode; pooled modes skip non-poolable ones."""
    out = {}
    for metric in METRIC_NAMES:
        if mode is AggregationMode.PIXEL_POOLED and metric not in POOLABLE_METRICS:
            continue
        out[metric] = aggregate_metric(by_video, mode, metric)
    return out


_CC_STRUCTURE = ndimage.generate_binary_structure(2, 2)  # 8-connectivity


def mask_to_box(mask: BinaryMask) -> BoundingBox | None:
    """Tight half-open box around the largest connected component."""
    bits = _as_bits(mask)
    if not bits.any():
        return None
    labels, count = ndimage.label(bits, structure=_CC_STRUCTURE)
    sizes = ndimage.sum_labels(bits, labels, index=np.arange(1, count + 1))
    largest = int(np.argmax(sizes)) + 1
    ys, xs = np.nonzero(labels == largest)
    return BoundingBox(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))


def detection_success_rate(
    pred_boxes: Mapping[int, BoundingBox | None],
    gt_boxes: Mapping[int, BoundingBox],
    tau: float = 0.5,
) -> float:
    """Fraction of annotated frames whose predicted box overlaps the reference
    box with IoU >= tau; a missing prediction counts as a failure."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if not gt_boxes:
        raise ValueError("no annotated frames for detection success rate")
    hits = 0
    for idx, gt_box in gt_boxes.items():
        pred = pred_boxes.get(idx)
        if pred is not None and pred.iou(gt_box) >= tau:
            hits += 1
    return hits / len(gt_boxes)


@dataclass(frozen=True)
class EvalFlags:
    mode: AggregationMode = AggregationMode.FRAME_THEN_VIDEO
    omit_last_frame: bool = False
    binarize_threshold: float = 0.5
    dsr_tau: float = 0.5


@dataclass(frozen=True)
class EvalReport:
    """Per-video metric table plus dataset aggregates for all three modes."""

    mode: AggregationMode
    flags: EvalFlags
    per_video: dict[str, dict[str, float | int | None]]
    aggregates: dict[str, dict[str, float]]
    sr: float | None
    warnings: tuple[str, ...]
    empty_gt_rule: str = EMPTY_GT_RULE

    @property
    def n_videos(self) -> int:
        return len(self.per_video)

    @property
    def n_frames(self) -> int:
        return int(sum(v["frames"] for v in self.per_video.values()))

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "flags": {
                "omit_last_frame": self.flags.omit_last_frame,
                "binarize_threshold": self.flags.binarize_threshold,
                "dsr_tau": self.flags.dsr_tau,
            },
            "empty_gt_rule": self.empty_gt_rule,
            "n_videos": self.n_videos,
            "n_frames": self.n_frames,
            "per_video": self.per_video,
            "aggregates": self.aggregates,
            "detection_success_rate": self.sr,
            "warnings": list(self.warnings),
        }


def evaluate_dataset(
    preds: Mapping[str, MaskSeries],
    gts: Mapping[str, GroundTruth],
    flags: EvalFlags = EvalFlags(),
) -> EvalReport:
    """Score predictions against sparse ground truth, annotated frames only.

    A video with a missing or incomplete prediction is scored with empty
    masks for the gap (all-zero overlap) and noted in the warnings rather
    than failing the evaluation.
    """
    extra = set(preds) - set(gts)
    if extra:
        raise ValueError(f"predictions reference unknown videos: {sorted(extra)}")
    warnings: list[str] = []
    by_video: dict[str, list[FrameScore]] = {}
    per_video: dict[str, dict[str, float | int | None]] = {}
    sr_hits: list[tuple[int, int]] = []  # (hits, total) per video
    for vid in sorted(gts):
        gt = gts[vid]
        series = preds.get(vid)
        if series is None:
            warnings.append(f"{vid}: no prediction; scoring empty masks")
        indices = gt.frame_indices()
        if flags.omit_last_frame and len(indices) > 1:
            indices = indices[:-1]
        scores: list[FrameScore] = []
        missing = 0
        for idx in indices:
            gt_mask = gt.masks[idx]
            pred_mask = series.get(idx) if series is not None else None
            if pred_mask is None:
                missing += 1
                pred_mask = BinaryMask.empty(gt_mask.width, gt_mask.height)
            scores.append(frame_scores(pred_mask, gt_mask))
        if series is not None and missing:
            warnings.append(f"{vid}: {missing} annotated frame(s) lack predictions")
        by_video[vid] = scores
        row: dict[str, float | int | None] = {"frames": len(scores)}
        for metric in METRIC_NAMES:
            row[metric] = float(np.mean([getattr(s, metric) for s in scores]))
        if gt.boxes:
            pred_boxes: dict[int, BoundingBox | None] = {}
            for idx in gt.boxes:
                mask = series.get(idx) if series is not None else None
                pred_boxes[idx] = mask_to_box(mask) if mask is not None else None
            hits = sum(
                1
                for idx, box in gt.boxes.items()
                if pred_boxes[idx] is not None
                and pred_boxes[idx].iou(box) >= flags.dsr_tau
            )
            row["sr"] = hits / len(gt.boxes)
            sr_hits.append((hits, len(gt.boxes)))
        else:
            row["sr"] = None
        per_video[vid] = row
    aggregates = {
        mode.value: aggregate(by_video, mode) for mode in AggregationMode
    }
    if sr_hits:
        total = sum(t for _, t in sr_hits)
        sr = sum(h for h, _ in sr_hits) / total if total else None
    else:
        sr = None
    return EvalReport(
        mode=flags.mode,
        flags=flags,
        per_video=per_video,
        aggregates=aggregates,
        sr=sr,
        warnings=tuple(warnings),
    )
