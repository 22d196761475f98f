"""Oracle providers: scripted stand-ins for the three neural capabilities.

Each oracle knows the scene script, so it can answer from exact geometry:
flow is the analytic field (plus optional noise), the detector fires on the
true box whenever the submitted image actually shows a highlight over the
object (an appearance-only detector cannot see the camouflaged object in a
raw frame, mirroring why motion cues matter), and the tracker returns true
masks on every frame reachable from a prompt in the propagation direction.

Degradation knobs make the oracles controllably imperfect: deterministic
per-frame misses, box jitter, mask drift, flow noise. Everything is seeded;
identical calls give identical answers.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..detection import Detection
from ..errors import UnknownSessionError
from ..providers.base import (
    DetectorProvider,
    FlowProvider,
    ProviderCapabilities,
    SegmenterProvider,
)
from ..tracking import Direction, MaskPrompt
from ..video import BinaryMask, BoundingBox, FlowField, Frame, VideoSequence
from .scene import GeneratedScene, SceneScript, generate

HIGHLIGHT_VISIBLE_FLOOR = 2.0  # mean abs diff inside the true box, intensity levels
HIGHLIGHT_CONTRAST = 1.5  # in-box diff must beat out-of-box diff by this factor


@dataclass(frozen=True)
class OracleKnobs:
    """Degradation dials for the oracle providers."""

    miss_rate: float = 0.0
    jitter: float = 0.0
    score: float = 0.5
    drift: float = 0.0
    flow_sigma: float = 0.0
    distractor_score: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must be in [0, 1]")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        if self.jitter < 0 or self.drift < 0 or self.flow_sigma < 0:
            raise ValueError("jitter, drift and flow_sigma cannot be negative")


class _SceneIndex:
    """Frame lookup for one scene: exact byte match, else nearest raw frame."""

    def __init__(self, scene: GeneratedScene) -> None:
        self.scene = scene
        self._exact = {
            f.pixels.tobytes(): f.index for f in scene.sequence.frames
        }

    def identify(self, frame: Frame) -> int:
        key = frame.pixels.tobytes()
        if key in self._exact:
            return self._exact[key]
        best, best_d = 0, np.inf
        probe = frame.pixels.astype(np.int32)
        for ref in self.scene.sequence.frames:
            if ref.pixels.shape != probe.shape:
                continue
            d = np.abs(ref.pixels.astype(np.int32) - probe).mean()
            if d < best_d:
                best, best_d = ref.index, d
        return best


def _capabilities(name: str) -> ProviderCapabilities:
    return ProviderCapabilities(
        supports_concurrent=True,
        max_image_edge=4096,
        model_name=name,
        models={
            "flow": "analytic-flow-oracle",
            "detector": "scene-oracle-detector",
            "segmenter": "scene-oracle-tracker",
        },
    )


class OracleFlowProvider(FlowProvider):
    """Analytic scene flow plus optional Gaussian noise."""

    def __init__(
        self,
        script: SceneScript,
        knobs: OracleKnobs = OracleKnobs(),
        scene: GeneratedScene | None = None,
    ) -> None:
        self.scene = scene if scene is not None else generate(script)
        self.knobs = knobs
        self._index = _SceneIndex(self.scene)

    def capabilities(self) -> ProviderCapabilities:
        return _capabilities("camoseg-oracle")

    def compute(self, prev: Frame, curr: Frame) -> FlowField:
        if (prev.width, prev.height) != (curr.width, curr.height):
            raise ValueError("frame pair dimensions differ")
        if prev.pixels.tobytes() == curr.pixels.tobytes():
            return FlowField(np.zeros((prev.height, prev.width, 2), dtype=np.float32))
        i = self._index.identify(prev)
        i = min(i, len(self.scene.flows) - 1)
        vec = self.scene.flows[i].vectors
        if self.knobs.flow_sigma > 0:
            rng = np.random.default_rng((self.knobs.seed, 101, i))
            vec = vec + rng.normal(0.0, self.knobs.flow_sigma, size=vec.shape)
        return FlowField(vec.astype(np.float32))


class OracleDetectorProvider(DetectorProvider):
    """Fires on the true box when the submitted image shows a highlight there.

    The object's texture matches the background, so a raw (un-highlighted)
    frame yields nothing. Stationary distractors are high-contrast and are
    reported regardless of highlighting; they label as the second query when
    one exists, otherwise they pollute the positive label.
    """

    def __init__(
        self,
        script: SceneScript,
        knobs: OracleKnobs = OracleKnobs(),
        scene: GeneratedScene | None = None,
    ) -> None:
        self.script = script
        self.scene = scene if scene is not None else generate(script)
        self.knobs = knobs
        self._index = _SceneIndex(self.scene)

    def capabilities(self) -> ProviderCapabilities:
        return _capabilities("camoseg-oracle")

    def _missed(self, frame_index: int) -> bool:
        if self.knobs.miss_rate <= 0:
            return False
        rng = np.random.default_rng((self.knobs.seed, 211, frame_index))
        return bool(rng.random() < self.knobs.miss_rate)

    def _jittered(self, box: BoundingBox, frame_index: int, w: int, h: int) -> BoundingBox:
        if self.knobs.jitter <= 0:
            return box
        rng = np.random.default_rng((self.knobs.seed, 223, frame_index))
        dx, dy = rng.uniform(-self.knobs.jitter, self.knobs.jitter, size=2)
        x0 = min(max(0.0, box.x0 + dx), w - 1.0)
        y0 = min(max(0.0, box.y0 + dy), h - 1.0)
        x1 = max(x0 + 1.0, min(float(w), box.x1 + dx))
        y1 = max(y0 + 1.0, min(float(h), box.y1 + dy))
        return BoundingBox(x0, y0, x1, y1)

    def _highlight_visible(self, image: Frame, frame_index: int) -> bool:
        raw = self.scene.raw_frames[frame_index]
        if raw.pixels.shape != image.pixels.shape:
            return False
        diff = np.abs(
            image.pixels.astype(np.float64) - raw.pixels.astype(np.float64)
        ).mean(axis=2)
        bits = self.scene.ground_truth.masks[frame_index].bits
        inside = float(diff[bits].mean()) if bits.any() else 0.0
        outside = float(diff[~bits].mean()) if (~bits).any() else 0.0
        return inside >= HIGHLIGHT_VISIBLE_FLOOR and inside >= HIGHLIGHT_CONTRAST * (
            outside + 1e-9
        )

    def detect(
        self, image: Frame, queries: Sequence[str], threshold: float
    ) -> list[Detection]:
        if not queries:
            raise ValueError("queries must be non-empty")
        i = self._index.identify(image)
        out: list[Detection] = []
        if (
            self.knobs.score >= threshold
            and not self._missed(i)
            and self._highlight_visible(image, i)
        ):
            box = self.scene.ground_truth.boxes[i]
            box = self._jittered(box, i, image.width, image.height)
            out.append(Detection(box=box, score=self.knobs.score, label_index=0))
        if (
            self.script.distractors
            and self.knobs.distractor_score > 0
            and self.knobs.distractor_score >= threshold
        ):
            label = 1 if len(queries) > 1 else 0
            for x0, y0, x1, y1 in self.script.distractors:
                out.append(
                    Detection(
                        box=BoundingBox(float(x0), float(y0), float(x1), float(y1)),
                        score=self.knobs.distractor_score,
                        label_index=label,
                    )
                )
        return out


class OracleTrackerProvider(SegmenterProvider):
    """Returns true masks for every frame reachable from a prompt.

    Reachability is forward within the direction-ordered frame list: frames
    at or after the earliest prompt. Nonzero drift shifts each mask right by
    drift * (distance to the nearest prompt frame) pixels.
    """

    def __init__(
        self,
        script: SceneScript,
        knobs: OracleKnobs = OracleKnobs(),
        scene: GeneratedScene | None = None,
    ) -> None:
        self.scene = scene if scene is not None else generate(script)
        self.knobs = knobs
        self._index = _SceneIndex(self.scene)
        self._sessions: dict[str, tuple[Frame, ...]] = {}

    def capabilities(self) -> ProviderCapabilities:
        return _capabilities("camoseg-oracle")

    def open_session(self, seq: VideoSequence) -> str:
        for sid, frames in self._sessions.items():
            if len(frames) == len(seq.frames) and all(
                a.pixels.tobytes() == b.pixels.tobytes()
                for a, b in zip(frames, seq.frames)
            ):
                return sid
        sid = uuid.uuid4().hex
        self._sessions[sid] = tuple(seq.frames)
        return sid

    def track(
        self, session_id: str, prompts: Sequence[MaskPrompt], direction: Direction
    ) -> dict[int, BinaryMask]:
        if session_id not in self._sessions:
            raise UnknownSessionError(f"unknown session {session_id!r}")
        if not prompts:
            return {}
        frames = self._sessions[session_id]
        if direction is Direction.BACKWARD:
            frames = tuple(reversed(frames))
        prompt_frames = sorted(p.frame_index for p in prompts)
        first = prompt_frames[0]
        out: dict[int, BinaryMask] = {}
        for j in range(first, len(frames)):
            orig = self._index.identify(frames[j])
            bits = self.scene.ground_truth.masks[orig].bits
            if self.knobs.drift > 0:
                nearest = min(abs(j - p) for p in prompt_frames)
                shift = int(round(self.knobs.drift * nearest))
                if shift:
                    shifted = np.zeros_like(bits)
                    if shift < bits.shape[1]:
                        shifted[:, shift:] = bits[:, : bits.shape[1] - shift]
                    bits = shifted
            out[j] = BinaryMask(bits)
        return out


def make_oracle_providers(
    script: SceneScript, knobs: OracleKnobs = OracleKnobs()
) -> tuple[OracleFlowProvider, OracleDetectorProvider, OracleTrackerProvider]:
    """Build all three oracles over one shared render of the scene."""
    scene = generate(script)
    return (
        OracleFlowProvider(script, knobs, scene=scene),
        OracleDetectorProvider(script, knobs, scene=scene),
        OracleTrackerProvider(script, knobs, scene=scene),
    )
