"""Per-frame motion-intensity cues.

Two routes produce the same artifact, a [0, 255] intensity map per frame:

* flow route: displacement magnitude, optionally after removing the
  frame-mean displacement (cancels global camera motion) and applying a
  momentum moving average (bridges brief pauses of the object);
* background-subtraction route: L1 difference between the current frame and
  a per-pixel background estimate.

Normalization is min-max per map. A constant map (max == min) normalizes to
all zeros: uniform motion carries no discriminative cue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .video import FlowField, Frame, IntensityMap

DEGENERATE_RANGE = 1e-12
HIGHLIGHT_BLUE = (0, 0, 255)


def subtract_mean_flow(flow: FlowField) -> FlowField:
    """Remove the frame-average displacement vector from every pixel."""
    vec = flow.vectors.astype(np.float64)
    mean = vec.reshape(-1, 2).mean(axis=0)
    return FlowField((vec - mean).astype(np.float32))


@dataclass
class FlowEmaState:
    """Running momentum average of flow; strictly sequential per video."""

    momentum: float
    ema: FlowField | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")


def apply_momentum(
    state: FlowEmaState, flow: FlowField, index: int
) -> tuple[FlowEmaState, FlowField]:
    """Momentum update: first flow passes through, later ones blend with the
    running average as (1 - m) * current + m * previous_result.
    """
    if index < 1:
        raise ValueError(f"flow index must be >= 1, got {index}")
    if state.ema is not None and (
        state.ema.width != flow.width or state.ema.height != flow.height
    ):
        raise DimensionMismatchError(
            f"flow is {flow.width}x{flow.height}, state is {state.ema.width}x{state.ema.height}"
        )
    if index == 1 or state.ema is None:
        result = flow
    else:
        m = state.momentum
        blended = (1.0 - m) * flow.vectors.astype(np.float64) + m * state.ema.vectors.astype(
            np.float64
        )
        result = FlowField(blended.astype(np.float32))
    state.ema = result
    return state, result


def normalize_intensity(
    raw: np.ndarray, lo: float | None = None, hi: float | None = None
) -> IntensityMap:
    """Min-max scale a nonnegative map to [0, 255]; constant maps go to zeros.

    Pass explicit (lo, hi) bounds to normalize several maps on a shared scale
    (per-video normalization).
    """
    raw = np.asarray(raw, dtype=np.float64)
    lo = float(raw.min()) if lo is None else float(lo)
    hi = float(raw.max()) if hi is None else float(hi)
    if hi - lo < DEGENERATE_RANGE:
        return IntensityMap(np.zeros_like(raw, dtype=np.float32))
    scaled = (np.clip(raw, lo, hi) - lo) * (255.0 / (hi - lo))
    return IntensityMap(scaled.astype(np.float32))


def flow_magnitude(flow: FlowField) -> np.ndarray:
    """Raw per-pixel L2 displacement magnitude (unnormalized)."""
    vec = flow.vectors.astype(np.float64)
    return np.sqrt(vec[:, :, 0] ** 2 + vec[:, :, 1] ** 2)


def flow_intensity(
    flow: FlowField, lo: float | None = None, hi: float | None = None
) -> IntensityMap:
    """Displacement-magnitude intensity map, min-max normalized to [0, 255]."""
    return normalize_intensity(flow_magnitude(flow), lo, hi)


def bgs_difference(frame: Frame, background: Frame) -> np.ndarray:
    """Raw per-pixel L1 difference over RGB between frame and background."""
    if (frame.width, frame.height) != (background.width, background.height):
        raise DimensionMismatchError(
            f"frame {frame.width}x{frame.height} vs background "
            f"{background.width}x{background.height}"
        )
    diff = frame.pixels.astype(np.int32) - background.pixels.astype(np.int32)
    return np.abs(diff).sum(axis=2).astype(np.float64)


def bgs_intensity(
    frame: Frame, background: Frame, lo: float | None = None, hi: float | None = None
) -> IntensityMap:
    """Background-difference intensity map, normalized like flow_intensity."""
    return normalize_intensity(bgs_difference(frame, background), lo, hi)


@dataclass(frozen=True)
class HighlightedFrame:
    """A frame with motion regions blended toward a highlight color.

    Blend law is linear per pixel: out = (1 - w) * frame + w * color with
    w = intensity / 255.
    """

    frame: Frame
    color: tuple[int, int, int] = HIGHLIGHT_BLUE
    law: str = "linear"

    @property
    def pixels(self) -> np.ndarray:
        return self.frame.pixels

    @property
    def width(self) -> int:
        return self.frame.width

    @property
    def height(self) -> int:
        return self.frame.height

    @property
    def index(self) -> int:
        return self.frame.index


def blend_highlight(
    frame: Frame, intensity: IntensityMap, color: tuple[int, int, int] = HIGHLIGHT_BLUE
) -> HighlightedFrame:
    """Blend the intensity map into the frame using the highlight color."""
    if (frame.width, frame.height) != (intensity.width, intensity.height):
        raise DimensionMismatchError(
            f"frame {frame.width}x{frame.height} vs intensity "
            f"{intensity.width}x{intensity.height}"
        )
    w = (intensity.values.astype(np.float64) / 255.0)[:, :, None]
    tint = np.asarray(color, dtype=np.float64)[None, None, :]
    out = (1.0 - w) * frame.pixels.astype(np.float64) + w * tint
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return HighlightedFrame(Frame(out, index=frame.index), color=tuple(color))
