"""Read/write dense flow fields in the Middlebury binary layout.

Layout: 4-byte magic ``PIEH``, little-endian int32 width, int32 height, then
width*height little-endian float32 (dx, dy) pairs, row-major. Round-trips are
bit-exact, which makes the format usable both for offline flow caches and as
the wire payload for flow responses.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .video import FlowField

MAGIC = b"PIEH"
_HEADER = struct.Struct("<ii")


def flow_to_bytes(flow: FlowField) -> bytes:
    """Serialize a flow field to Middlebury bytes."""
    vec = np.ascontiguousarray(flow.vectors, dtype="<f4")
    return MAGIC + _HEADER.pack(flow.width, flow.height) + vec.tobytes()


def flow_from_bytes(payload: bytes) -> FlowField:
    """Parse Middlebury bytes back into a flow field.

    Raises FormatError on a bad magic, bad dimensions, or a truncated payload.
    """
    if len(payload) < 12:
        raise FormatError(f"flow payload too short ({len(payload)} bytes)")
    if payload[:4] != MAGIC:
        raise FormatError(f"bad flow magic {payload[:4]!r}, expected {MAGIC!r}")
    width, height = _HEADER.unpack_from(payload, 4)
    if width <= 0 or height <= 0:
        raise FormatError(f"bad flow dimensions {width}x{height}")
    expected = 12 + width * height * 8
    if len(payload) != expected:
        raise FormatError(f"flow payload is {len(payload)} bytes, expected {expected}")
    vec = np.frombuffer(payload, dtype="<f4", offset=12).reshape(height, width, 2)
    return FlowField(vec)


def write_flow_file(flow: FlowField, path: str | Path) -> None:
    Path(path).write_bytes(flow_to_bytes(flow))


def read_flow_file(path: str | Path) -> FlowField:
    return flow_from_bytes(Path(path).read_bytes())
