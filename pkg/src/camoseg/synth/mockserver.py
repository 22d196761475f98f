"""In-process HTTP server exposing the oracle providers over the wire
protocol, for protocol tests and offline end-to-end runs.

Semantics beyond the oracles themselves:

* ``X-Request-Id`` deduplication: a repeated id replays the cached response
  body byte-for-byte, making client retries idempotent.
* Frames that do not belong to the configured scene (arbitrary conformance
  payloads) get structurally valid answers: zero flow of the input size, no
  detections, all-false masks of the session's size.
"""

from __future__ import annotations

import json
import threading
import uuid
from collections import OrderedDict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from ..errors import MalformedResponseError
from ..providers import wire
from ..video import BinaryMask, FlowField, Frame, VideoSequence
from .oracles import OracleKnobs, make_oracle_providers
from .scene import SceneScript

DEDUP_CACHE_SIZE = 256


class _State:
    def __init__(self, script: SceneScript, knobs: OracleKnobs) -> None:
        self.flow, self.detector, self.tracker = make_oracle_providers(script, knobs)
        self.scene_size = (script.width, script.height)
        self.sessions: dict[str, tuple[Frame, ...]] = {}
        self.dedup: OrderedDict[str, tuple[int, bytes]] = OrderedDict()
        self.lock = threading.Lock()


class _Handler(BaseHTTPRequestHandler):
    server_version = "camoseg-mock/0.1"

    def log_message(self, fmt: str, *args) -> None:  # quiet test servers
        pass

    @property
    def state(self) -> _State:
        return self.server.state  # type: ignore[attr-defined]

    def _send(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _reply(self, status: int, obj: dict) -> None:
        body = json.dumps(obj, sort_keys=True).encode()
        request_id = self.headers.get("X-Request-Id")
        if request_id:
            with self.state.lock:
                self.state.dedup[request_id] = (status, body)
                while len(self.state.dedup) > DEDUP_CACHE_SIZE:
                    self.state.dedup.popitem(last=False)
        self._send(status, body)

    def _replay_if_duplicate(self) -> bool:
        request_id = self.headers.get("X-Request-Id")
        if not request_id:
            return False
        with self.state.lock:
            cached = self.state.dedup.get(request_id)
        if cached is None:
            return False
        self._send(*cached)
        return True

    def do_GET(self) -> None:
        if self.path != "/v1/capabilities":
            self._reply(404, {"error": f"unknown path {self.path}"})
            return
        caps = self.state.detector.capabilities()
        self._reply(
            200,
            {
                "supports_concurrent": caps.supports_concurrent,
                "max_image_edge": caps.max_image_edge,
                "model_name": caps.model_name,
                "models": caps.models,
            },
        )

    def do_POST(self) -> None:
        if self._replay_if_duplicate():
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(payload, dict):
                raise ValueError("body must be a JSON object")
        except (ValueError, json.JSONDecodeError) as exc:
            self._reply(400, {"error": f"bad request body: {exc}"})
            return
        handlers = {
            "/v1/flow": self._handle_flow,
            "/v1/detect": self._handle_detect,
            "/v1/session": self._handle_session,
            "/v1/track": self._handle_track,
        }
        handler = handlers.get(self.path)
        if handler is None:
            self._reply(404, {"error": f"unknown path {self.path}"})
            return
        try:
            handler(payload)
        except (KeyError, TypeError, ValueError, MalformedResponseError) as exc:
            self._reply(400, {"error": str(exc)})

    def _handle_flow(self, payload: dict) -> None:
        prev = wire.frame_from_b64(str(payload["prev_png_b64"]))
        curr = wire.frame_from_b64(str(payload["curr_png_b64"]))
        if (prev.width, prev.height) != (curr.width, curr.height):
            self._reply(400, {"error": "frame pair dimensions differ"})
            return
        if (prev.width, prev.height) != self.state.scene_size:
            flow = FlowField(np.zeros((prev.height, prev.width, 2), dtype=np.float32))
        else:
            flow = self.state.flow.compute(prev, curr)
        self._reply(200, {"flow_b64": wire.flow_to_b64(flow)})

    def _handle_detect(self, payload: dict) -> None:
        image = wire.frame_from_b64(str(payload["image_png_b64"]))
        queries = payload["queries"]
        threshold = float(payload["threshold"])
        if not isinstance(queries, list) or not queries:
            raise ValueError("queries must be a non-empty list")
        dets = self.state.detector.detect(image, [str(q) for q in queries], threshold)
        self._reply(200, {"detections": [wire.detection_to_json(d) for d in dets]})

    def _handle_session(self, payload: dict) -> None:
        frames_b64 = payload["frames"]
        if not isinstance(frames_b64, list) or len(frames_b64) < 2:
            raise ValueError("a session needs at least 2 frames")
        frames = tuple(
            wire.frame_from_b64(str(b), index=i) for i, b in enumerate(frames_b64)
        )
        dims = {(f.width, f.height) for f in frames}
        if len(dims) > 1:
            raise ValueError(f"session frames mix dimensions: {sorted(dims)}")
        sid = uuid.uuid4().hex
        with self.state.lock:
            self.state.sessions[sid] = frames
        self._reply(200, {"session_id": sid})

    def _handle_track(self, payload: dict) -> None:
        sid = str(payload["session_id"])
        direction = wire.direction_from_wire(str(payload["direction"]))
        prompts = [wire.prompt_from_json(p) for p in payload["prompts"]]
        with self.state.lock:
            frames = self.state.sessions.get(sid)
        if frames is None:
            self._reply(404, {"error": f"unknown session {sid!r}"})
            return
        if not prompts:
            self._reply(200, {"masks": []})
            return
        if any(p.frame_index >= len(frames) for p in prompts):
            raise ValueError("prompt frame outside the session")
        w, h = frames[0].width, frames[0].height
        if (w, h) == self.state.scene_size:
            tracker_sid = self.state.tracker.open_session(
                VideoSequence(frames, source_id=sid)
            )
            masks = self.state.tracker.track(tracker_sid, prompts, direction)
        else:
            first = min(p.frame_index for p in prompts)
            masks = {
                j: BinaryMask(np.zeros((h, w), dtype=bool))
                for j in range(first, len(frames))
            }
        self._reply(
            200,
            {
                "masks": [
                    {"frame": j, "png_b64": wire.mask_to_b64(m)}
                    for j, m in sorted(masks.items())
                ]
            },
        )


class MockProviderServer:
    """Threaded HTTP server over the oracle providers; use as a context manager."""

    def __init__(
        self,
        script: SceneScript,
        knobs: OracleKnobs = OracleKnobs(),
        host: str = "127.0.0.1",
        port: int = 0,
    ) -> None:
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.state = _State(script, knobs)  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockProviderServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockProviderServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
