"""Mask-prompt assembly and bidirectional propagation.

Detections become segmenter prompts (box plus the intensity center of mass
as a positive point). A promptable video segmenter propagates the prompts
forward; for backward coverage the video and prompt indices are reversed,
the provider runs on the reversed sequence, and output indices map back.
The two directions merge with a per-frame OR.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .detection import Detection
from .errors import DimensionMismatchError
from .video import BinaryMask, BoundingBox, IntensityMap, MaskSeries, VideoSequence

if TYPE_CHECKING:
    from .providers.base import SegmenterProvider


class Direction(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class PromptMode(Enum):
    BOX_ONLY = "box_only"
    BOX_PLUS_POINT = "box_plus_point"


@dataclass(frozen=True)
class MaskPrompt:
    """Segmentation cue for one frame: a box and an optional positive point."""

    frame_index: int
    box: BoundingBox
    point: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError("frame index must be non-negative")
        if self.point is not None:
            x, y = self.point
            if not (self.box.x0 <= x <= self.box.x1 and self.box.y0 <= y <= self.box.y1):
                raise ValueError(f"point {self.point} outside box {self.box.as_tuple()}")


@dataclass(frozen=True)
class PromptTimeline:
    """Prompts ordered by strictly increasing frame index."""

    prompts: tuple[MaskPrompt, ...]

    def __post_init__(self) -> None:
        prompts = tuple(self.prompts)
        indices = [p.frame_index for p in prompts]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"prompt frame indices must strictly increase, got {indices}")
        object.__setattr__(self, "prompts", prompts)

    def __len__(self) -> int:
        return len(self.prompts)

    def __bool__(self) -> bool:
        return bool(self.prompts)


def center_of_mass(
    intensity: IntensityMap, box: BoundingBox
) -> tuple[float, float] | None:
    """Intensity-weighted mean pixel position inside the box.

    None when the in-box intensity sum is zero (no cue to weight by).
    """
    x0 = max(0, int(np.floor(box.x0)))
    y0 = max(0, int(np.floor(box.y0)))
    x1 = min(intensity.width, int(np.ceil(box.x1)))
    y1 = min(intensity.height, int(np.ceil(box.y1)))
    if x0 >= x1 or y0 >= y1:
        return None
    patch = intensity.values[y0:y1, x0:x1].astype(np.float64)
    total = patch.sum()
    if total <= 0.0:
        return None
    ys, xs = np.mgrid[y0:y1, x0:x1]
    cx = float((xs * patch).sum() / total)
    cy = float((ys * patch).sum() / total)
    return (cx, cy)


def assemble_prompts(
    detections: Mapping[int, Detection | None],
    intensities: Mapping[int, IntensityMap],
    mode: PromptMode = PromptMode.BOX_PLUS_POINT,
) -> PromptTimeline:
    """One prompt per detected frame; in box-plus-point mode the point is the
    in-box center of mass, falling back to the box center when undefined."""
    prompts: list[MaskPrompt] = []
    for idx in sorted(detections):
        det = detections[idx]
        if det is None:
            continue
        point = None
        if mode is PromptMode.BOX_PLUS_POINT:
            intensity = intensities.get(idx)
            if intensity is not None:
                point = center_of_mass(intensity, det.box)
            if point is None:
                point = (
                    (det.box.x0 + det.box.x1) / 2.0,
                    (det.box.y0 + det.box.y1) / 2.0,
                )
        prompts.append(MaskPrompt(frame_index=idx, box=det.box, point=point))
    return PromptTimeline(tuple(prompts))


def reverse_series(series: MaskSeries, total_frames: int) -> MaskSeries:
    """Map frame indices i -> total_frames - 1 - i (an involution)."""
    return MaskSeries(
        {total_frames - 1 - i: m for i, m in series.masks.items()},
        video_id=series.video_id,
    )


def propagate(
    provider: "SegmenterProvider",
    seq: VideoSequence,
    timeline: PromptTimeline,
    direction: Direction = Direction.FORWARD,
) -> MaskSeries:
    """Propagate prompts through the video in one temporal direction.

    An empty timeline yields an empty series. Prompt and output indices are
    in original video coordinates regardless of direction.
    """
    if not timeline:
        return MaskSeries({}, video_id=seq.source_id)
    t = len(seq)
    for p in timeline.prompts:
        if p.frame_index >= t:
            raise ValueError(f"prompt frame {p.frame_index} outside video of {t} frames")
    if direction is Direction.FORWARD:
        local_prompts = list(timeline.prompts)
    else:
        local_prompts = sorted(
            (
                MaskPrompt(t - 1 - p.frame_index, p.box, p.point)
                for p in timeline.prompts
            ),
            key=lambda p: p.frame_index,
        )
    session = provider.open_session(seq)
    local = provider.track(session, local_prompts, direction)
    if direction is Direction.FORWARD:
        masks = dict(local)
    else:
        masks = {t - 1 - j: m for j, m in local.items()}
    return MaskSeries(masks, video_id=seq.source_id)


def merge_bidirectional(fwd: MaskSeries, bwd: MaskSeries) -> MaskSeries:
    """Per-frame OR of two mask series; one-sided frames pass through."""
    if fwd.video_id != bwd.video_id:
        raise ValueError(f"video ids differ: {fwd.video_id!r} vs {bwd.video_id!r}")
    merged: dict[int, BinaryMask] = {}
    for idx in sorted(set(fwd.masks) | set(bwd.masks)):
        a = fwd.get(idx)
        b = bwd.get(idx)
        if a is not None and b is not None:
            if (a.width, a.height) != (b.width, b.height):
                raise DimensionMismatchError(
                    f"frame {idx}: {a.width}x{a.height} vs {b.width}x{b.height}"
                )
            merged[idx] = BinaryMask(a.bits | b.bits)
        else:
            merged[idx] = a if a is not None else b  # type: ignore[assignment]
    return MaskSeries(merged, video_id=fwd.video_id)
