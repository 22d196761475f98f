"""Golden-suite conformance checks for any server claiming the wire protocol.

The suite replays canned requests against a live base URL and verifies schema
and encoding compatibility: capabilities shape, bit-exact flow payload
round-trips, detection/mask schemas, session lifecycle, request-id
deduplication, and malformed-input rejection. It makes no assumptions about
model quality, so it passes against the oracle mock and a real sidecar alike.
"""

from __future__ import annotations

import base64
import json
import uuid
from dataclasses import dataclass, field

import numpy as np
import requests

from ..video import Frame
from . import wire

CHECK_TIMEOUT = 30.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ConformanceReport:
    base_url: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"conformance against {self.base_url}:"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            detail = f" - {c.detail}" if c.detail else ""
            lines.append(f"  [{status}] {c.name}{detail}")
        verdict = "ALL PASS" if self.passed else "FAILURES PRESENT"
        lines.append(f"  => {verdict}")
        return "\n".join(lines)


def _golden_frames() -> tuple[Frame, Frame]:
    """Two small deterministic frames; the second is the first shifted."""
    rng = np.random.default_rng(1234)
    base = rng.integers(0, 256, size=(32, 32, 3)).astype(np.uint8)
    shifted = np.roll(base, shift=2, axis=1)
    return Frame(base, index=0), Frame(shifted, index=1)


class _Session:
    def __init__(self, base_url: str) -> None:
        self.base = base_url.rstrip("/")
        self.http = requests.Session()

    def get(self, name: str, request_id: str | None = None):
        headers = {"X-Request-Id": request_id} if request_id else {}
        return self.http.get(f"{self.base}/v1/{name}", headers=headers, timeout=CHECK_TIMEOUT)

    def post(self, name: str, payload: dict, request_id: str | None = None):
        headers = {"X-Request-Id": request_id} if request_id else {}
        return self.http.post(
            f"{self.base}/v1/{name}", json=payload, headers=headers, timeout=CHECK_TIMEOUT
        )


def conformance_check(base_url: str) -> ConformanceReport:
    """Run the golden suite; returns a per-check pass/fail report."""
    s = _Session(base_url)
    prev, curr = _golden_frames()
    checks: list[CheckResult] = []

    def run(name: str, fn) -> None:
        try:
            detail = fn()
            checks.append(CheckResult(name, True, detail or ""))
        except Exception as exc:  # noqa: BLE001 - each check reports, not raises
            checks.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    def check_capabilities() -> str:
        resp = s.get("capabilities")
        assert resp.status_code == 200, f"status {resp.status_code}"
        body = resp.json()
        assert isinstance(body.get("supports_concurrent"), bool), "supports_concurrent"
        assert isinstance(body.get("max_image_edge"), int), "max_image_edge"
        assert body["max_image_edge"] >= 64, "max_image_edge >= 64"
        assert isinstance(body.get("model_name"), str) and body["model_name"], "model_name"
        models = body.get("models")
        assert isinstance(models, dict), "models object"
        for role in ("flow", "detector", "segmenter"):
            assert isinstance(models.get(role), str) and models[role], f"models.{role}"
        return f"models: {models}"

    def check_flow_roundtrip() -> str:
        resp = s.post(
            "flow",
            {
                "prev_png_b64": wire.frame_to_b64(prev),
                "curr_png_b64": wire.frame_to_b64(curr),
            },
        )
        assert resp.status_code == 200, f"status {resp.status_code}: {resp.text[:200]}"
        payload = resp.json()["flow_b64"]
        raw = base64.b64decode(payload)
        flow = wire.flow_from_b64(payload)
        assert (flow.width, flow.height) == (prev.width, prev.height), "flow dims"
        assert np.isfinite(flow.vectors).all(), "finite flow"
        re_encoded = wire.flow_to_b64(flow)
        assert base64.b64decode(re_encoded) == raw, "flow payload not bit-exact"
        return f"{len(raw)} payload bytes round-trip bit-exactly"

    def check_flow_rejects_garbage() -> str:
        resp = s.post("flow", {"prev_png_b64": "!!notb64!!", "curr_png_b64": "x"})
        assert resp.status_code == 400, f"expected 400, got {resp.status_code}"
        return "malformed image rejected with 400"

    def check_detect_schema() -> str:
        queries = ["an animal or insect being highlighted in blue", "background"]
        resp = s.post(
            "detect",
            {"image_png_b64": wire.frame_to_b64(prev), "queries": queries, "threshold": 0.1},
        )
        assert resp.status_code == 200, f"status {resp.status_code}: {resp.text[:200]}"
        dets = resp.json()["detections"]
        assert isinstance(dets, list), "detections list"
        for d in dets:
            box = d["box"]
            assert len(box) == 4 and box[0] < box[2] and box[1] < box[3], "box shape"
            assert 0.0 <= d["score"] <= 1.0, "score range"
            assert 0 <= d["label_index"] < len(queries), "label_index range"
        return f"{len(dets)} detections, all schema-valid"

    def check_detect_threshold_subset() -> str:
        image = wire.frame_to_b64(prev)
        queries = ["object"]
        low = s.post("detect", {"image_png_b64": image, "queries": queries, "threshold": 0.05})
        high = s.post("detect", {"image_png_b64": image, "queries": queries, "threshold": 0.9})
        assert low.status_code == 200 and high.status_code == 200, "detect status"
        n_low = len(low.json()["detections"])
        n_high = len(high.json()["detections"])
        assert n_high <= n_low, f"threshold monotonicity ({n_high} > {n_low})"
        return f"{n_low} @0.05 >= {n_high} @0.9"

    def check_session_and_track() -> str:
        frames = [wire.frame_to_b64(prev), wire.frame_to_b64(curr), wire.frame_to_b64(prev)]
        resp = s.post("session", {"frames": frames})
        assert resp.status_code == 200, f"session status {resp.status_code}"
        sid = resp.json()["session_id"]
        assert isinstance(sid, str) and sid, "session_id"
        track = s.post(
            "track",
            {
                "session_id": sid,
                "direction": "forward",
                "prompts": [{"frame": 0, "box": [4.0, 4.0, 20.0, 20.0], "point": [10.0, 10.0]}],
            },
        )
        assert track.status_code == 200, f"track status {track.status_code}: {track.text[:200]}"
        masks = track.json()["masks"]
        assert isinstance(masks, list) and masks, "masks list non-empty"
        for item in masks:
            assert 0 <= item["frame"] < len(frames), "mask frame index"
            mask = wire.mask_from_b64(item["png_b64"])
            assert (mask.width, mask.height) == (prev.width, prev.height), "mask dims"
        empty = s.post("track", {"session_id": sid, "direction": "backward", "prompts": []})
        assert empty.status_code == 200 and empty.json()["masks"] == [], "empty prompts"
        return f"{len(masks)} masks decoded"

    def check_unknown_session() -> str:
        resp = s.post(
            "track",
            {"session_id": "no-such-session", "direction": "forward", "prompts": [
                {"frame": 0, "box": [0.0, 0.0, 4.0, 4.0], "point": None}
            ]},
        )
        assert resp.status_code == 404, f"expected 404, got {resp.status_code}"
        return "stale session rejected with 404"

    def check_request_id_dedup() -> str:
        rid = uuid.uuid4().hex
        payload = {
            "image_png_b64": wire.frame_to_b64(curr),
            "queries": ["object"],
            "threshold": 0.2,
        }
        first = s.post("detect", payload, request_id=rid)
        second = s.post("detect", payload, request_id=rid)
        assert first.status_code == second.status_code == 200, "dedup status"
        assert first.content == second.content, "duplicate request id bodies differ"
        return "identical bodies for repeated X-Request-Id"

    run("capabilities schema", check_capabilities)
    run("flow round-trip bit-exact", check_flow_roundtrip)
    run("flow rejects malformed payload", check_flow_rejects_garbage)
    run("detect schema", check_detect_schema)
    run("detect threshold subset", check_detect_threshold_subset)
    run("session + track lifecycle", check_session_and_track)
    run("unknown session -> 404", check_unknown_session)
    run("X-Request-Id dedup", check_request_id_dedup)
    return ConformanceReport(base_url=base_url, checks=tuple(checks))
