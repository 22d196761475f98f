"""Synthetic camouflaged-motion scenes with exact ground truth.

A scene is a procedural noise background, one camouflaged object whose
texture comes from the same noise process with a small contrast offset
(appearance-only detectors fail on it; motion reveals it), an optional set
of stationary high-contrast distractors, and integer per-frame object and
camera trajectories. Everything downstream is analytic: masks follow the
object geometry exactly, and flow is the apparent per-pixel displacement.

Sign convention: flow at frame i holds the displacement from frame i to
frame i+1 in camera coordinates. The apparent motion of the background under
a camera step c is -c (a camera panning right makes the scene slide left);
the object's apparent motion is its world step minus the camera step.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..video import BinaryMask, BoundingBox, FlowField, Frame, GroundTruth, VideoSequence

NOISE_LOW = 60
NOISE_HIGH = 196


class SceneError(ValueError):
    """The script is inconsistent or the object leaves the visible frame."""


@dataclass(frozen=True)
class SceneScript:
    """Full recipe for one synthetic video; integer geometry throughout."""

    width: int
    height: int
    frame_count: int
    seed: int = 0
    object_shape: str = "rect"  # rect | disk
    object_size: int = 24
    object_start: tuple[int, int] = (10, 10)  # top-left of the object bbox, frame coords
    object_steps: tuple[tuple[int, int], ...] = ()
    camera_steps: tuple[tuple[int, int], ...] = ()
    contrast_delta: int = 5
    distractors: tuple[tuple[int, int, int, int], ...] = ()  # (x0, y0, x1, y1), frame coords
    name: str = "scene"

    def __post_init__(self) -> None:
        if self.frame_count < 2:
            raise SceneError("need at least 2 frames")
        if self.object_shape not in ("rect", "disk"):
            raise SceneError(f"unknown object shape {self.object_shape!r}")
        if self.object_size < 2:
            raise SceneError("object too small")
        steps = self.object_steps or ((0, 0),) * self.frame_count
        cam = self.camera_steps or ((0, 0),) * self.frame_count
        if len(steps) != self.frame_count or len(cam) != self.frame_count:
            raise SceneError("trajectory length must equal the frame count")
        object.__setattr__(self, "object_steps", tuple((int(x), int(y)) for x, y in steps))
        object.__setattr__(self, "camera_steps", tuple((int(x), int(y)) for x, y in cam))

    def object_positions(self) -> list[tuple[int, int]]:
        """World top-left corner of the object bbox at each frame.

        Step i is the displacement applied between frames i-1 and i, so the
        first entry is ignored by convention.
        """
        pos = [tuple(self.object_start)]
        for step in self.object_steps[1:]:
            prev = pos[-1]
            pos.append((prev[0] + step[0], prev[1] + step[1]))
        return pos

    def camera_positions(self) -> list[tuple[int, int]]:
        pos = [(0, 0)]
        for step in self.camera_steps[1:]:
            prev = pos[-1]
            pos.append((prev[0] + step[0], prev[1] + step[1]))
        return pos

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SceneScript":
        raw = json.loads(text)
        raw["object_start"] = tuple(raw["object_start"])
        raw["object_steps"] = tuple(tuple(s) for s in raw["object_steps"])
        raw["camera_steps"] = tuple(tuple(s) for s in raw["camera_steps"])
        raw["distractors"] = tuple(tuple(d) for d in raw["distractors"])
        return cls(**raw)

    @classmethod
    def load(cls, path: str | Path) -> "SceneScript":
        return cls.from_json(Path(path).read_text())


def _noise(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    raw = rng.integers(NOISE_LOW, NOISE_HIGH, size=shape).astype(np.float64)
    smooth = ndimage.uniform_filter(raw, size=3, mode="nearest")
    return np.clip(np.rint(smooth), 0, 255).astype(np.uint8)


def _object_mask(shape: str, size: int) -> np.ndarray:
    if shape == "rect":
        return np.ones((size, size), dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    return (yy - c) ** 2 + (xx - c) ** 2 <= (size / 2.0) ** 2


@dataclass(frozen=True)
class GeneratedScene:
    sequence: VideoSequence
    ground_truth: GroundTruth
    flows: tuple[FlowField, ...]
    raw_frames: tuple[Frame, ...] = field(repr=False, default=())


def generate(script: SceneScript) -> GeneratedScene:
    """Render the scene: frames, exact masks/boxes, analytic flow fields."""
    cam_pos = script.camera_positions()
    obj_pos = script.object_positions()
    cam_x = [p[0] for p in cam_pos]
    cam_y = [p[1] for p in cam_pos]
    pad_x0, pad_x1 = -min(0, min(cam_x)), max(0, max(cam_x))
    pad_y0, pad_y1 = -min(0, min(cam_y)), max(0, max(cam_y))
    world_w = script.width + pad_x0 + pad_x1
    world_h = script.height + pad_y0 + pad_y1

    rng = np.random.default_rng(script.seed)
    background = np.stack([_noise((world_h, world_w), rng) for _ in range(3)], axis=2)
    obj_texture = np.stack(
        [_noise((script.object_size, script.object_size), rng) for _ in range(3)], axis=2
    )
    obj_texture = np.clip(
        obj_texture.astype(np.int16) + script.contrast_delta, 0, 255
    ).astype(np.uint8)
    shape_mask = _object_mask(script.object_shape, script.object_size)

    for x0, y0, x1, y1 in script.distractors:
        dx0, dy0 = x0 + pad_x0, y0 + pad_y0
        if x1 <= x0 or y1 <= y0 or dx0 < 0 or dy0 < 0 or dx0 + (x1 - x0) > world_w or dy0 + (y1 - y0) > world_h:
            raise SceneError(f"distractor {(x0, y0, x1, y1)} outside the world canvas")
        patch = np.stack(
            [_noise((y1 - y0, x1 - x0), rng) for _ in range(3)], axis=2
        )
        background[dy0 : dy0 + (y1 - y0), dx0 : dx0 + (x1 - x0)] = np.clip(
            patch.astype(np.int16) + 60, 0, 255
        ).astype(np.uint8)

    frames: list[Frame] = []
    masks: dict[int, BinaryMask] = {}
    boxes: dict[int, BoundingBox] = {}
    size = script.object_size
    for i in range(script.frame_count):
        world = background.copy()
        # object positions are frame coords at t=0 (camera starts at the origin)
        ox = obj_pos[i][0] + pad_x0
        oy = obj_pos[i][1] + pad_y0
        if ox < 0 or oy < 0 or ox + size > world_w or oy + size > world_h:
            raise SceneError(f"object leaves the world canvas at frame {i}")
        region = world[oy : oy + size, ox : ox + size]
        region[shape_mask] = obj_texture[shape_mask]

        wx = cam_pos[i][0] + pad_x0
        wy = cam_pos[i][1] + pad_y0
        frame_px = world[wy : wy + script.height, wx : wx + script.width]
        frames.append(Frame(frame_px.copy(), index=i))

        mask = np.zeros((world_h, world_w), dtype=bool)
        mask[oy : oy + size, ox : ox + size] = shape_mask
        frame_mask = mask[wy : wy + script.height, wx : wx + script.width]
        if not frame_mask.any():
            raise SceneError(f"object leaves the visible frame at frame {i}")
        masks[i] = BinaryMask(frame_mask)
        ys, xs = np.nonzero(frame_mask)
        boxes[i] = BoundingBox(
            float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1)
        )

    flows: list[FlowField] = []
    for i in range(script.frame_count - 1):
        cam_step = script.camera_steps[i + 1]
        obj_step = script.object_steps[i + 1]
        vec = np.empty((script.height, script.width, 2), dtype=np.float32)
        vec[:, :, 0] = -cam_step[0]
        vec[:, :, 1] = -cam_step[1]
        bits = masks[i].bits
        vec[:, :, 0][bits] = obj_step[0] - cam_step[0]
        vec[:, :, 1][bits] = obj_step[1] - cam_step[1]
        flows.append(FlowField(vec))

    sequence = VideoSequence(tuple(frames), source_id=script.name)
    gt = GroundTruth(masks=masks, boxes=boxes, video_id=script.name)
    return GeneratedScene(
        sequence=sequence,
        ground_truth=gt,
        flows=tuple(flows),
        raw_frames=tuple(frames),
    )
