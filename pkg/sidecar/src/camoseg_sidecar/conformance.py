"""Replay a golden request suite against a live server and verify schema and
encoding compatibility with the provider wire protocol.

Checks are model-agnostic: they validate shapes, ranges, byte-exact flow
payload round-trips, session behavior, dedup, and error statuses, so the
suite passes against the stub backend, real models, or the camoseg mock
server alike.
"""

from __future__ import annotations

import base64
import uuid
from dataclasses import dataclass

import numpy as np
import requests

from .wire import flow_from_b64, flow_to_b64, image_from_b64, image_to_b64

TIMEOUT = 30.0


@dataclass(frozen=True)
class EndpointCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ConformanceReport:
    base_url: str
    checks: tuple[EndpointCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"conformance against {self.base_url}:"]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            suffix = f" - {c.detail}" if c.detail else ""
            lines.append(f"  [{mark}] {c.name}{suffix}")
        lines.append("  => " + ("ALL PASS" if self.passed else "FAILURES PRESENT"))
        return "\n".join(lines)


def _golden_pair() -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(977)
    base = rng.integers(0, 256, size=(32, 32, 3)).astype(np.uint8)
    return base, np.roll(base, 3, axis=1)


def conformance_check(base_url: str) -> ConformanceReport:
    base = base_url.rstrip("/")
    http = requests.Session()
    prev, curr = _golden_pair()
    checks: list[EndpointCheck] = []

    def run(name, fn):
        try:
            detail = fn() or ""
            checks.append(EndpointCheck(name, True, detail))
        except Exception as exc:  # noqa: BLE001 - collected, not raised
            checks.append(EndpointCheck(name, False, f"{type(exc).__name__}: {exc}"))

    def post(path, payload, request_id=None):
        headers = {"X-Request-Id": request_id} if request_id else {}
        return http.post(f"{base}/v1/{path}", json=payload, headers=headers, timeout=TIMEOUT)

    def capabilities():
        resp = http.get(f"{base}/v1/capabilities", timeout=TIMEOUT)
        assert resp.status_code == 200, f"status {resp.status_code}"
        body = resp.json()
        assert isinstance(body["supports_concurrent"], bool)
        assert isinstance(body["max_image_edge"], int) and body["max_image_edge"] >= 64
        assert isinstance(body["model_name"], str) and body["model_name"]
        models = body["models"]
        for role in ("flow", "detector", "segmenter"):
            assert isinstance(models[role], str) and models[role], f"models.{role}"
        return f"models: {models}"

    def flow_roundtrip():
        resp = post(
            "flow",
            {"prev_png_b64": image_to_b64(prev), "curr_png_b64": image_to_b64(curr)},
        )
        assert resp.status_code == 200, f"status {resp.status_code}: {resp.text[:200]}"
        payload = resp.json()["flow_b64"]
        vectors = flow_from_b64(payload)
        assert vectors.shape == (32, 32, 2), f"shape {vectors.shape}"
        assert np.isfinite(vectors).all()
        assert base64.b64decode(flow_to_b64(vectors)) == base64.b64decode(payload), (
            "payload not byte-exact after decode/encode"
        )
        return "bit-exact round trip"

    def flow_rejects_malformed():
        resp = post("flow", {"prev_png_b64": "!!", "curr_png_b64": "!!"})
        assert resp.status_code == 400, f"expected 400, got {resp.status_code}"

    def detect_schema():
        queries = ["an animal or insect being highlighted in blue", "background"]
        resp = post(
            "detect",
            {"image_png_b64": image_to_b64(prev), "queries": queries, "threshold": 0.1},
        )
        assert resp.status_code == 200, f"status {resp.status_code}: {resp.text[:200]}"
        dets = resp.json()["detections"]
        assert isinstance(dets, list)
        for d in dets:
            assert len(d["box"]) == 4 and d["box"][0] < d["box"][2] and d["box"][1] < d["box"][3]
            assert 0.0 <= d["score"] <= 1.0
            assert 0 <= d["label_index"] < len(queries)
        return f"{len(dets)} detections"

    def detect_threshold_subset():
        image = image_to_b64(curr)
        low = post("detect", {"image_png_b64": image, "queries": ["object"], "threshold": 0.05})
        high = post("detect", {"image_png_b64": image, "queries": ["object"], "threshold": 0.9})
        assert low.status_code == high.status_code == 200
        assert len(high.json()["detections"]) <= len(low.json()["detections"])

    def session_lifecycle():
        frames = [image_to_b64(prev), image_to_b64(curr), image_to_b64(prev)]
        created = post("session", {"frames": frames})
        assert created.status_code == 200, f"status {created.status_code}"
        sid = created.json()["session_id"]
        assert isinstance(sid, str) and sid
        tracked = post(
            "track",
            {
                "session_id": sid,
                "direction": "forward",
                "prompts": [{"frame": 0, "box": [4.0, 4.0, 20.0, 20.0], "point": [10.0, 10.0]}],
            },
        )
        assert tracked.status_code == 200, f"status {tracked.status_code}: {tracked.text[:200]}"
        masks = tracked.json()["masks"]
        assert isinstance(masks, list) and masks, "masks list non-empty"
        for item in masks:
            assert 0 <= item["frame"] < len(frames)
            decoded = image_from_b64(item["png_b64"])  # PNG decodes; dims match
            assert decoded.shape[:2] == (32, 32)
        empty = post("track", {"session_id": sid, "direction": "backward", "prompts": []})
        assert empty.status_code == 200 and empty.json()["masks"] == []
        return f"{len(masks)} masks"

    def unknown_session():
        resp = post(
            "track",
            {
                "session_id": "definitely-not-real",
                "direction": "forward",
                "prompts": [{"frame": 0, "box": [0.0, 0.0, 2.0, 2.0], "point": None}],
            },
        )
        assert resp.status_code == 404, f"expected 404, got {resp.status_code}"

    def request_id_dedup():
        rid = uuid.uuid4().hex
        payload = {"image_png_b64": image_to_b64(prev), "queries": ["object"], "threshold": 0.2}
        a = post("detect", payload, request_id=rid)
        b = post("detect", payload, request_id=rid)
        assert a.status_code == b.status_code == 200
        assert a.content == b.content, "bodies differ for one request id"

    run("capabilities schema", capabilities)
    run("flow round-trip bit-exact", flow_roundtrip)
    run("flow rejects malformed payload", flow_rejects_malformed)
    run("detect schema", detect_schema)
    run("detect threshold subset", detect_threshold_subset)
    run("session + track lifecycle", session_lifecycle)
    run("unknown session -> 404", unknown_session)
    run("X-Request-Id dedup", request_id_dedup)
    return ConformanceReport(base_url=base_url, checks=tuple(checks))
