"""Wire codecs for the provider protocol: JSON bodies, base64 PNG images,
base64 Middlebury flow payloads.

Endpoints (all under /v1, all accepting an X-Request-Id header for
idempotent retries):

    POST /v1/flow          {prev_png_b64, curr_png_b64} -> {flow_b64}
    POST /v1/detect        {image_png_b64, queries, threshold}
                           -> {detections: [{box: [x0,y0,x1,y1], score, label_index}]}
    POST /v1/session       {frames: [png_b64, ...]} -> {session_id}
    POST /v1/track         {session_id, direction, prompts: [{frame, box, point|null}]}
                           -> {masks: [{frame, png_b64}]}
    GET  /v1/capabilities  -> {supports_concurrent, max_image_edge, model_name, models}
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from ..detection import Detection
from ..errors import MalformedResponseError
from ..flowio import flow_from_bytes, flow_to_bytes
from ..tracking import Direction, MaskPrompt
from ..video import BinaryMask, BoundingBox, FlowField, Frame


def frame_to_b64(frame: Frame) -> str:
    buf = io.BytesIO()
    Image.fromarray(frame.pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def frame_from_b64(data: str, index: int = 0) -> Frame:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise MalformedResponseError(f"bad PNG payload: {exc}") from exc
    return Frame(arr, index=index)


def mask_to_b64(mask: BinaryMask) -> str:
    buf = io.BytesIO()
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def mask_from_b64(data: str) -> BinaryMask:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except Exception as exc:
        raise MalformedResponseError(f"bad mask payload: {exc}") from exc
    return BinaryMask(arr >= 128)


def flow_to_b64(flow: FlowField) -> str:
    return base64.b64encode(flow_to_bytes(flow)).decode("ascii")


def flow_from_b64(data: str) -> FlowField:
    try:
        raw = base64.b64decode(data, validate=True)
    except Exception as exc:
        raise MalformedResponseError(f"bad flow payload encoding: {exc}") from exc
    return flow_from_bytes(raw)


def detection_to_json(det: Detection) -> dict:
    return {
        "box": list(det.box.as_tuple()),
        "score": det.score,
        "label_index": det.label_index,
    }


def detection_from_json(obj: dict) -> Detection:
    try:
        box = obj["box"]
        return Detection(
            box=BoundingBox(float(box[0]), float(box[1]), float(box[2]), float(box[3])),
            score=float(obj["score"]),
            label_index=int(obj["label_index"]),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise MalformedResponseError(f"bad detection object {obj!r}: {exc}") from exc


def prompt_to_json(prompt: MaskPrompt) -> dict:
    return {
        "frame": prompt.frame_index,
        "box": list(prompt.box.as_tuple()),
        "point": list(prompt.point) if prompt.point is not None else None,
    }


def prompt_from_json(obj: dict) -> MaskPrompt:
    try:
        box = obj["box"]
        point = obj.get("point")
        return MaskPrompt(
            frame_index=int(obj["frame"]),
            box=BoundingBox(float(box[0]), float(box[1]), float(box[2]), float(box[3])),
            point=(float(point[0]), float(point[1])) if point is not None else None,
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise MalformedResponseError(f"bad prompt object {obj!r}: {exc}") from exc


def direction_to_wire(direction: Direction) -> str:
    return direction.value


def direction_from_wire(value: str) -> Direction:
    try:
        return Direction(value)
    except ValueError as exc:
        raise MalformedResponseError(f"bad direction {value!r}") from exc
