"""HTTP clients for the provider wire protocol.

Transport failures and 5xx responses are retried with exponential backoff
(0.5 s, 1 s, 2 s, ...). Every request carries a client-generated
X-Request-Id so a server can deduplicate retried work; retrying is therefore
idempotent. 4xx responses are not retried: the request itself is wrong.
"""

from __future__ import annotations

import time
import uuid
from typing import Any, Callable, Sequence

import requests

from ..detection import Detection
from ..errors import MalformedResponseError, TransportError, UnknownSessionError
from ..tracking import Direction, MaskPrompt
from ..video import BinaryMask, FlowField, Frame, VideoSequence
from . import wire
from .base import (
    DetectorProvider,
    FlowProvider,
    ProviderCapabilities,
    ProviderEndpoint,
    SegmenterProvider,
)

BACKOFF_START = 0.5


class HttpProviderClient:
    """Shared plumbing: one endpoint, retries, request ids, JSON decoding."""

    def __init__(
        self,
        endpoint: ProviderEndpoint,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.endpoint = endpoint
        self._session = session or requests.Session()
        self._sleep = sleep

    def _url(self, name: str) -> str:
        return f"{self.endpoint.base_url.rstrip('/')}/{self.endpoint.api_version}/{name}"

    def request(self, method: str, name: str, payload: dict | None = None) -> dict:
        request_id = uuid.uuid4().hex
        attempts = self.endpoint.max_retries + 1
        delay = BACKOFF_START
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                resp = self._session.request(
                    method,
                    self._url(name),
                    json=payload,
                    timeout=self.endpoint.timeout,
                    headers={"X-Request-Id": request_id},
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 404:
                    raise UnknownSessionError(f"{name}: {resp.text[:200]}")
                if 400 <= resp.status_code < 500:
                    raise MalformedResponseError(
                        f"{name} rejected ({resp.status_code}): {resp.text[:200]}"
                    )
                if resp.status_code >= 500:
                    last_error = TransportError(
                        f"{name} failed ({resp.status_code}): {resp.text[:200]}"
                    )
                else:
                    try:
                        body = resp.json()
                    except ValueError as exc:
                        raise MalformedResponseError(
                            f"{name}: response body is not JSON"
                        ) from exc
                    if not isinstance(body, dict):
                        raise MalformedResponseError(f"{name}: expected a JSON object")
                    return body
            if attempt + 1 < attempts:
                self._sleep(delay)
                delay *= 2.0
        raise TransportError(
            f"{name} unreachable after {attempts} attempt(s): {last_error}"
        )

    def capabilities(self) -> ProviderCapabilities:
        body = self.request("GET", "capabilities")
        try:
            return ProviderCapabilities(
                supports_concurrent=bool(body["supports_concurrent"]),
                max_image_edge=int(body["max_image_edge"]),
                model_name=str(body["model_name"]),
                models=dict(body["models"]) if body.get("models") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"bad capabilities body: {body!r}") from exc


def _expect(body: dict, key: str) -> Any:
    if key not in body:
        raise MalformedResponseError(f"response missing {key!r}: {body!r}")
    return body[key]


class HttpFlowProvider(FlowProvider):
    def __init__(self, client: HttpProviderClient) -> None:
        self.client = client

    def compute(self, prev: Frame, curr: Frame) -> FlowField:
        if (prev.width, prev.height) != (curr.width, curr.height):
            raise ValueError("frame pair dimensions differ")
        body = self.client.request(
            "POST",
            "flow",
            {"prev_png_b64": wire.frame_to_b64(prev), "curr_png_b64": wire.frame_to_b64(curr)},
        )
        flow = wire.flow_from_b64(str(_expect(body, "flow_b64")))
        if (flow.width, flow.height) != (prev.width, prev.height):
            raise MalformedResponseError(
                f"flow is {flow.width}x{flow.height}, frames are {prev.width}x{prev.height}"
            )
        return flow


class HttpDetectorProvider(DetectorProvider):
    def __init__(self, client: HttpProviderClient) -> None:
        self.client = client

    def detect(
        self, image: Frame, queries: Sequence[str], threshold: float
    ) -> list[Detection]:
        if not queries:
            raise ValueError("queries must be non-empty")
        body = self.client.request(
            "POST",
            "detect",
            {
                "image_png_b64": wire.frame_to_b64(image),
                "queries": list(queries),
                "threshold": threshold,
            },
        )
        dets = _expect(body, "detections")
        if not isinstance(dets, list):
            raise MalformedResponseError("detections must be a list")
        return [wire.detection_from_json(d) for d in dets]


class HttpSegmenterProvider(SegmenterProvider):
    """Posts the video once and reuses the server-side session for both
    propagation directions."""

    def __init__(self, client: HttpProviderClient) -> None:
        self.client = client
        self._session_cache: dict[tuple[str, int], str] = {}

    def open_session(self, seq: VideoSequence) -> str:
        key = (seq.source_id, len(seq))
        cached = self._session_cache.get(key)
        if cached is not None:
            return cached
        body = self.client.request(
            "POST",
            "session",
            {"frames": [wire.frame_to_b64(f) for f in seq.frames]},
        )
        sid = str(_expect(body, "session_id"))
        self._session_cache[key] = sid
        return sid

    def track(
        self, session_id: str, prompts: Sequence[MaskPrompt], direction: Direction
    ) -> dict[int, BinaryMask]:
        body = self.client.request(
            "POST",
            "track",
            {
                "session_id": session_id,
                "direction": wire.direction_to_wire(direction),
                "prompts": [wire.prompt_to_json(p) for p in prompts],
            },
        )
        masks = _expect(body, "masks")
        if not isinstance(masks, list):
            raise MalformedResponseError("masks must be a list")
        out: dict[int, BinaryMask] = {}
        for item in masks:
            try:
                frame = int(item["frame"])
                out[frame] = wire.mask_from_b64(str(item["png_b64"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedResponseError(f"bad mask object {item!r}: {exc}") from exc
        return out


def build_http_providers(
    endpoint: ProviderEndpoint,
) -> tuple[HttpFlowProvider, HttpDetectorProvider, HttpSegmenterProvider]:
    client = HttpProviderClient(endpoint)
    return (
        HttpFlowProvider(client),
        HttpDetectorProvider(client),
        HttpSegmenterProvider(client),
    )
