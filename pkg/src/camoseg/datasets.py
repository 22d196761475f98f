"""Dataset ingestion and mask persistence.

Supported on-disk layout (the common animal-camera benchmark convention,
subdirectory names configurable):

    <root>/<video>/Imgs/00000.jpg ...   RGB frames, lexicographic order
    <root>/<video>/GT/00000.png ...     single-channel masks, values {0, 255}
    <root>/<video>/boxes.json           optional: {"<index>": [x0, y0, x1, y1]}

Mask pixels >= 128 are treated as foreground on ingest; nominally masks are
{0, 255} but compression-adjacent artifacts occur in the wild.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetError, DimensionMismatchError, FormatError
from .video import BinaryMask, BoundingBox, Frame, GroundTruth, MaskSeries, VideoSequence

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
MASK_INGEST_THRESHOLD = 128

DEFAULT_IMGS_SUBDIR = "Imgs"
DEFAULT_GT_SUBDIR = "GT"


def _image_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise DatasetError(f"not a directory: {directory}")
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise DatasetError(f"no image files in {directory}")
    return files


def load_sequence(directory: str | Path, source_id: str | None = None) -> VideoSequence:
    """Load a video from a directory of image files, ordered by filename.

    The sequence id defaults to the name of the video directory: for the
    benchmark layout ``<video>/Imgs`` that is the parent of the image folder.
    """
    directory = Path(directory)
    files = _image_files(directory)
    if source_id is None:
        source_id = (
            directory.parent.name
            if directory.name == DEFAULT_IMGS_SUBDIR and directory.parent.name
            else directory.name
        )
    frames = []
    for i, path in enumerate(files):
        try:
            with Image.open(path) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise FormatError(f"cannot decode image {path}: {exc}") from exc
        frames.append(Frame(arr, index=i))
    widths = {f.width for f in frames}
    heights = {f.height for f in frames}
    if len(widths) > 1 or len(heights) > 1:
        raise DimensionMismatchError(
            f"mixed frame dimensions in {directory}: {sorted(widths)}x{sorted(heights)}"
        )
    return VideoSequence(tuple(frames), source_id=source_id)


def _frame_index_from_name(path: Path) -> int:
    digits = "".join(ch for ch in path.stem if ch.isdigit())
    if not digits:
        raise DatasetError(f"mask filename carries no frame index: {path.name}")
    return int(digits)


def load_ground_truth(
    directory: str | Path,
    stride_hint: int = 5,
    expect_size: tuple[int, int] | None = None,
    video_id: str = "",
) -> GroundTruth:
    """Load sparse reference masks (and boxes.json when present).

    Frame indices are parsed from mask filenames; ``stride_hint`` documents the
    expected annotation cadence and is not enforced. When ``expect_size`` is
    given as (width, height), each mask is validated against it.
    """
    directory = Path(directory)
    files = _image_files(directory)
    masks: dict[int, BinaryMask] = {}
    for path in files:
        idx = _frame_index_from_name(path)
        try:
            with Image.open(path) as img:
                arr = np.asarray(img.convert("L"), dtype=np.uint8)
        except Exception as exc:
            raise FormatError(f"cannot decode mask {path}: {exc}") from exc
        if expect_size is not None and (arr.shape[1], arr.shape[0]) != expect_size:
            raise DimensionMismatchError(
                f"mask {path.name} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {expect_size[0]}x{expect_size[1]}"
            )
        masks[idx] = BinaryMask(arr >= MASK_INGEST_THRESHOLD)
    boxes = _load_boxes(directory.parent / "boxes.json")
    if not video_id:
        video_id = directory.parent.name if directory.parent.name else directory.name
    return GroundTruth(masks=masks, boxes=boxes, video_id=video_id)


def _load_boxes(path: Path) -> dict[int, BoundingBox] | None:
    if not path.is_file():
        return None
    try:
        raw = json.loads(path.read_text())
        return {int(k): BoundingBox(*map(float, v)) for k, v in raw.items()}
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad boxes file {path}: {exc}") from exc


def save_mask_series(series: MaskSeries, directory: str | Path, pad: int = 5) -> list[Path]:
    """Write one single-channel {0, 255} PNG per mask, named by frame index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for idx in series.frame_indices():
        mask = series.masks[idx]
        arr = np.where(mask.bits, 255, 0).astype(np.uint8)
        path = directory / f"{idx:0{pad}d}.png"
        Image.fromarray(arr, mode="L").save(path)
        written.append(path)
    return written


def load_mask_series(directory: str | Path, video_id: str = "") -> MaskSeries:
    """Read a directory of prediction masks back into a MaskSeries."""
    directory = Path(directory)
    files = _image_files(directory)
    masks = {}
    for path in files:
        idx = _frame_index_from_name(path)
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
        masks[idx] = BinaryMask(arr >= MASK_INGEST_THRESHOLD)
    return MaskSeries(masks=masks, video_id=video_id or directory.name)


def discover_videos(
    root: str | Path, imgs_subdir: str = DEFAULT_IMGS_SUBDIR
) -> list[Path]:
    """List video directories under a dataset root, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root does not exist: {root}")
    videos = sorted(
        child for child in root.iterdir() if (child / imgs_subdir).is_dir()
    )
    if not videos:
        raise DatasetError(f"no '<video>/{imgs_subdir}' directories under {root}")
    return videos
