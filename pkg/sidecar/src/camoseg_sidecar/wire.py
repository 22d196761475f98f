"""Wire payload codecs.

The protocol moves images as base64 PNG and dense flow as the base64-encoded
Middlebury binary layout: magic ``PIEH``, little-endian int32 width and
height, then width*height float32 (dx, dy) pairs row-major. Flow encoding is
byte-exact: decode(encode(x)) == x at the buffer level.
"""

from __future__ import annotations

import base64
import io
import struct

import numpy as np
from PIL import Image

FLOW_MAGIC = b"PIEH"
_DIMS = struct.Struct("<ii")


class PayloadError(ValueError):
    """A request or response payload violates the wire format."""


def image_to_b64(rgb: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def image_from_b64(data: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise PayloadError(f"bad PNG payload: {exc}") from exc


def mask_to_b64(bits: np.ndarray) -> str:
    buf = io.BytesIO()
    arr = np.where(bits.astype(bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def flow_to_b64(vectors: np.ndarray) -> str:
    h, w = vectors.shape[:2]
    payload = FLOW_MAGIC + _DIMS.pack(w, h) + np.ascontiguousarray(
        vectors, dtype="<f4"
    ).tobytes()
    return base64.b64encode(payload).decode("ascii")


def flow_from_b64(data: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
    except Exception as exc:
        raise PayloadError(f"bad flow payload encoding: {exc}") from exc
    if len(raw) < 12 or raw[:4] != FLOW_MAGIC:
        raise PayloadError("bad flow magic")
    w, h = _DIMS.unpack_from(raw, 4)
    if w <= 0 or h <= 0 or len(raw) != 12 + w * h * 8:
        raise PayloadError("bad flow dimensions or truncated payload")
    return np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2).copy()
