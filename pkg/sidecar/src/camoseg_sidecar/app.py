"""FastAPI application implementing the five provider endpoints.

Semantics the clients rely on:

* ``X-Request-Id`` deduplication: a repeated id within the cache window
  replays the cached body byte-for-byte, making client retries idempotent.
* Sessions: frames are uploaded once (POST /v1/session) and referenced by id
  for both tracking directions; an evicted or unknown id is a 404.
* Flow is forward with a frame gap of 1: the caller supplies each pair.
* Errors: 400 malformed request, 404 unknown session, 503 model not loaded.

Endpoints are sync handlers (FastAPI's worker threadpool), and each model is
guarded by a lock so at most one inference per capability runs at a time
unless the server is configured concurrent; /v1/capabilities reports the
effective setting.
"""

from __future__ import annotations

import contextlib
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .backends import BackendUnavailable, InferenceBackend
from .sessions import DEFAULT_CAPACITY, SessionStore
from .wire import PayloadError, flow_to_b64, image_from_b64, mask_to_b64

DEDUP_CACHE_SIZE = 256
MAX_IMAGE_EDGE = 4096
VALID_DIRECTIONS = ("forward", "backward")


@dataclass
class ServerConfig:
    backend: InferenceBackend
    session_capacity: int = DEFAULT_CAPACITY
    allow_concurrent: bool = False
    service_name: str = "camoseg-sidecar"


@dataclass
class _Dedup:
    cache: OrderedDict = field(default_factory=OrderedDict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def get(self, request_id: str | None):
        if not request_id:
            return None
        with self.lock:
            return self.cache.get(request_id)

    def put(self, request_id: str | None, status: int, body: bytes) -> None:
        if not request_id:
            return
        with self.lock:
            self.cache[request_id] = (status, body)
            while len(self.cache) > DEDUP_CACHE_SIZE:
                self.cache.popitem(last=False)


def create_app(config: ServerConfig) -> FastAPI:
    app = FastAPI(title="camoseg-sidecar", docs_url=None, redoc_url=None)
    backend = config.backend
    sessions = SessionStore(capacity=config.session_capacity)
    dedup = _Dedup()

    def make_guard():
        return contextlib.nullcontext() if config.allow_concurrent else threading.Lock()

    guards = {role: make_guard() for role in ("flow", "detector", "segmenter")}

    def reply(request: Request, status: int, payload: dict) -> Response:
        response = JSONResponse(payload, status_code=status)
        dedup.put(request.headers.get("X-Request-Id"), status, response.body)
        return response

    @app.middleware("http")
    async def replay_duplicates(request: Request, call_next):
        cached = dedup.get(request.headers.get("X-Request-Id"))
        if cached is not None:
            status, body = cached
            return Response(content=body, status_code=status, media_type="application/json")
        return await call_next(request)

    @app.get("/v1/capabilities")
    def capabilities(request: Request) -> Response:
        return reply(
            request,
            200,
            {
                "supports_concurrent": config.allow_concurrent,
                "max_image_edge": MAX_IMAGE_EDGE,
                "model_name": config.service_name,
                "models": backend.registry.as_dict(),
            },
        )

    @app.post("/v1/flow")
    def flow(request: Request, payload: dict = Body(...)) -> Response:
        try:
            prev = image_from_b64(str(payload["prev_png_b64"]))
            curr = image_from_b64(str(payload["curr_png_b64"]))
            if prev.shape != curr.shape:
                raise PayloadError("frame pair dimensions differ")
        except (PayloadError, KeyError, TypeError) as exc:
            return reply(request, 400, {"error": str(exc)})
        try:
            with guards["flow"]:
                vectors = backend.flow(prev, curr)
        except BackendUnavailable as exc:
            return reply(request, 503, {"error": str(exc)})
        return reply(request, 200, {"flow_b64": flow_to_b64(vectors)})

    @app.post("/v1/detect")
    def detect(request: Request, payload: dict = Body(...)) -> Response:
        try:
            image = image_from_b64(str(payload["image_png_b64"]))
            queries = payload["queries"]
            threshold = float(payload["threshold"])
            if not isinstance(queries, list) or not queries:
                raise PayloadError("queries must be a non-empty list")
            queries = [str(q) for q in queries]
        except (PayloadError, KeyError, TypeError, ValueError) as exc:
            return reply(request, 400, {"error": str(exc)})
        try:
            with guards["detector"]:
                detections = backend.detect(image, queries, threshold)
        except BackendUnavailable as exc:
            return reply(request, 503, {"error": str(exc)})
        detections = [d for d in detections if d["score"] >= threshold]
        return reply(request, 200, {"detections": detections})

    @app.post("/v1/session")
    def session(request: Request, payload: dict = Body(...)) -> Response:
        try:
            frames_b64 = payload["frames"]
            if not isinstance(frames_b64, list) or len(frames_b64) < 2:
                raise PayloadError("a session needs at least 2 frames")
            frames = [image_from_b64(str(b)) for b in frames_b64]
            if len({f.shape for f in frames}) > 1:
                raise PayloadError("session frames mix dimensions")
        except (PayloadError, KeyError, TypeError) as exc:
            return reply(request, 400, {"error": str(exc)})
        session_id = sessions.create(frames)
        return reply(request, 200, {"session_id": session_id})

    @app.post("/v1/track")
    def track(request: Request, payload: dict = Body(...)) -> Response:
        try:
            session_id = str(payload["session_id"])
            direction = str(payload["direction"])
            if direction not in VALID_DIRECTIONS:
                raise PayloadError(f"direction must be one of {VALID_DIRECTIONS}")
            raw_prompts = payload["prompts"]
            if not isinstance(raw_prompts, list):
                raise PayloadError("prompts must be a list")
            prompts = []
            for p in raw_prompts:
                box = [float(v) for v in p["box"]]
                if len(box) != 4 or box[0] >= box[2] or box[1] >= box[3]:
                    raise PayloadError(f"bad box {box}")
                point = p.get("point")
                prompts.append(
                    {
                        "frame": int(p["frame"]),
                        "box": box,
                        "point": [float(point[0]), float(point[1])] if point else None,
                    }
                )
        except (PayloadError, KeyError, TypeError, ValueError, IndexError) as exc:
            return reply(request, 400, {"error": str(exc)})
        stored = sessions.get(session_id)
        if stored is None:
            return reply(request, 404, {"error": f"unknown session {session_id!r}"})
        if any(p["frame"] < 0 or p["frame"] >= len(stored.frames) for p in prompts):
            return reply(request, 400, {"error": "prompt frame outside the session"})
        if not prompts:
            return reply(request, 200, {"masks": []})
        try:
            with guards["segmenter"]:
                masks = backend.track(stored.frames, prompts, direction)
        except BackendUnavailable as exc:
            return reply(request, 503, {"error": str(exc)})
        return reply(
            request,
            200,
            {
                "masks": [
                    {"frame": int(j), "png_b64": mask_to_b64(m)}
                    for j, m in sorted(masks.items())
                ]
            },
        )

    return app
