"""Emit synthetic datasets in the benchmark directory layout.

Each video directory gets lossless PNG frames under Imgs/, sparse masks
under GT/, a boxes.json with tight object boxes, and the scene.json recipe
the oracle providers replay from. The whole pipeline consumes synthetic and
real data identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..video import BinaryMask, MaskSeries
from .scene import SceneScript, generate

PAD = 5


def standard_script(
    index: int,
    frames: int = 30,
    size: int = 128,
    seed: int = 0,
    panning: bool | None = None,
    with_distractor: bool = False,
) -> SceneScript:
    """A varied but deterministic scene for fixture datasets.

    Even indices are static-camera scenes, odd ones pan (override with
    ``panning``). Object velocity and shape vary with the index.
    """
    rng = np.random.default_rng((seed, index))
    pan = (index % 2 == 1) if panning is None else panning
    obj_size = int(16 + (index % 3) * 4)
    vx = int(rng.integers(1, 3))
    vy = int(rng.integers(0, 2))
    cam_step = (int(rng.integers(1, 3)), 0) if pan else (0, 0)
    # apparent object velocity must stay nonzero and the object in frame
    obj_step = (cam_step[0] + vx, vy)
    travel_x = (frames - 1) * (obj_step[0] - cam_step[0])
    travel_y = (frames - 1) * obj_step[1]
    start_x = max(2, (size - obj_size - travel_x) // 2)
    start_y = max(2, (size - obj_size - travel_y) // 2)
    distractors = ((size - 30, 6, size - 8, 22),) if with_distractor else ()
    return SceneScript(
        width=size,
        height=size,
        frame_count=frames,
        seed=int(rng.integers(0, 2**31)),
        object_shape="rect" if index % 2 == 0 else "disk",
        object_size=obj_size,
        object_start=(start_x, start_y),
        object_steps=((0, 0),) + (obj_step,) * (frames - 1),
        camera_steps=((0, 0),) + (cam_step,) * (frames - 1),
        distractors=distractors,
        name=f"synth_{index:03d}",
    )


def write_video(script: SceneScript, root: str | Path, gt_stride: int = 1) -> Path:
    """Render one script into <root>/<name>/{Imgs,GT,boxes.json,scene.json}."""
    scene = generate(script)
    video_dir = Path(root) / script.name
    imgs = video_dir / "Imgs"
    gt_dir = video_dir / "GT"
    imgs.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)
    for frame in scene.sequence.frames:
        Image.fromarray(frame.pixels, mode="RGB").save(imgs / f"{frame.index:0{PAD}d}.png")
    boxes = {}
    annotated = [i for i in range(script.frame_count) if i % gt_stride == 0]
    for i in annotated:
        mask = scene.ground_truth.masks[i]
        arr = np.where(mask.bits, 255, 0).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(gt_dir / f"{i:0{PAD}d}.png")
        boxes[str(i)] = list(scene.ground_truth.boxes[i].as_tuple())
    (video_dir / "boxes.json").write_text(json.dumps(boxes, sort_keys=True))
    (video_dir / "scene.json").write_text(script.to_json())
    return video_dir


def write_dataset(
    root: str | Path,
    videos: int = 10,
    frames: int = 30,
    size: int = 128,
    seed: int = 0,
    gt_stride: int = 1,
    with_distractors: bool = False,
) -> list[Path]:
    """A standard mixed-camera dataset; deterministic per seed."""
    return [
        write_video(
            standard_script(
                i, frames=frames, size=size, seed=seed, with_distractor=with_distractors
            ),
            root,
            gt_stride=gt_stride,
        )
        for i in range(videos)
    ]
