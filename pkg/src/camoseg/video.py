"""Core array-backed types: frames, sequences, flow fields, masks, ground truth.

All types freeze their numpy buffers after construction, so instances can be
shared across concurrent workers without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DimensionMismatchError


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, half-open: [x0, x1) x [y0, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def iou(self, other: "BoundingBox") -> float:
        """Intersection-over-union of two boxes; 0 when disjoint."""
        ix0 = max(self.x0, other.x0)
        iy0 = max(self.y0, other.y0)
        ix1 = min(self.x1, other.x1)
        iy1 = min(self.y1, other.y1)
        if ix0 >= ix1 or iy0 >= iy1:
            return 0.0
        inter = (ix1 - ix0) * (iy1 - iy0)
        return inter / (self.area + other.area - inter)

    def clipped(self, width: int, height: int) -> "BoundingBox":
        """Clip to image bounds; raises ValueError when nothing remains."""
        return BoundingBox(
            max(0.0, self.x0),
            max(0.0, self.y0),
            min(float(width), self.x1),
            min(float(height), self.y1),
        )


@dataclass(frozen=True)
class Frame:
    """One RGB video frame.

    pixels: (height, width, 3) uint8 array, row-major RGB.
    index: 0-based position of the frame in its sequence.
    """

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f"frame pixels must be (h, w, 3) uint8, got {px.shape} {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def luma(self) -> np.ndarray:
        """Grayscale conversion: 0.299 R + 0.587 G + 0.114 B, float32."""
        px = self.pixels.astype(np.float32)
        return px[:, :, 0] * 0.299 + px[:, :, 1] * 0.587 + px[:, :, 2] * 0.114


@dataclass(frozen=True)
class VideoSequence:
    """Ordered frames of one video; at least two, all the same size."""

    frames: tuple[Frame, ...]
    source_id: str

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise ValueError(f"video '{self.source_id}' needs >= 2 frames, got {len(frames)}")
        w, h = frames[0].width, frames[0].height
        for f in frames:
            if (f.width, f.height) != (w, h):
                raise DimensionMismatchError(
                    f"frame {f.index} is {f.width}x{f.height}, expected {w}x{h}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def reversed(self) -> "VideoSequence":
        rev = tuple(
            Frame(f.pixels, index=i) for i, f in enumerate(reversed(self.frames))
        )
        return VideoSequence(rev, source_id=self.source_id)


@dataclass(frozen=True)
class FlowField:
    """Dense displacement field: (height, width, 2) float32 of (dx, dy) pixels."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vectors, dtype=np.float32)
        if vec.ndim != 3 or vec.shape[2] != 2:
            raise ValueError(f"flow vectors must be (h, w, 2), got {vec.shape}")
        if not np.isfinite(vec).all():
            raise ValueError("flow field contains non-finite values")
        object.__setattr__(self, "vectors", _freeze(vec))

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean map; dimensions match the associated frame."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"mask bits must be 2-D, got {bits.shape}")
        object.__setattr__(self, "bits", _freeze(bits.astype(bool)))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))


@dataclass(frozen=True)
class MaskSeries:
    """Per-frame binary masks for one video, keyed by 0-based frame index."""

    masks: Mapping[int, BinaryMask]
    video_id: str

    def __post_init__(self) -> None:
        masks = dict(self.masks)
        dims = {(m.width, m.height) for m in masks.values()}
        if len(dims) > 1:
            raise DimensionMismatchError(f"mask series '{self.video_id}' mixes sizes {dims}")
        if any(i < 0 for i in masks):
            raise ValueError("negative frame index in mask series")
        object.__setattr__(self, "masks", masks)

    def __len__(self) -> int:
        return len(self.masks)

    def frame_indices(self) -> list[int]:
        return sorted(self.masks)

    def get(self, index: int) -> BinaryMask | None:
        return self.masks.get(index)


@dataclass(frozen=True)
class GroundTruth:
    """Sparse reference annotations: masks always, boxes when the dataset has them."""

    masks: Mapping[int, BinaryMask]
    boxes: Mapping[int, BoundingBox] | None = None
    video_id: str = ""

    def __post_init__(self) -> None:
        masks = dict(self.masks)
        if not masks:
            raise ValueError(f"ground truth for '{self.video_id}' has no annotated frame")
        object.__setattr__(self, "masks", masks)
        if self.boxes is not None:
            object.__setattr__(self, "boxes", dict(self.boxes))

    def frame_indices(self) -> list[int]:
        return sorted(self.masks)


@dataclass(frozen=True)
class IntensityMap:
    """Per-pixel scalar motion strength in [0, 255], float32."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 2:
            raise ValueError(f"intensity values must be 2-D, got {vals.shape}")
        if vals.size and (vals.min() < 0.0 or vals.max() > 255.0):
            raise ValueError("intensity values outside [0, 255]")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, width: int, height: int) -> "IntensityMap":
        return cls(np.zeros((height, width), dtype=np.float32))
