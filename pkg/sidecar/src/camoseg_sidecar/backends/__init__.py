"""Model backends: the three inference capabilities behind one interface."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class BackendUnavailable(RuntimeError):
    """The backend's runtime dependencies or weights are not loadable."""


@dataclass(frozen=True)
class ModelRegistry:
    """Model identities reported verbatim via /v1/capabilities."""

    flow: str
    detector: str
    segmenter: str

    def as_dict(self) -> dict[str, str]:
        return {"flow": self.flow, "detector": self.detector, "segmenter": self.segmenter}


class InferenceBackend(ABC):
    """One object serving all three capabilities.

    Frames are (h, w, 3) uint8 RGB arrays. Prompt boxes are half-open pixel
    tuples (x0, y0, x1, y1); points are (x, y). Track output maps frame
    positions in the direction-ordered list to boolean masks.
    """

    registry: ModelRegistry

    @abstractmethod
    def flow(self, prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
        """Dense forward flow, (h, w, 2) float32."""

    @abstractmethod
    def detect(
        self, image: np.ndarray, queries: list[str], threshold: float
    ) -> list[dict]:
        """Detections as {'box': [x0, y0, x1, y1], 'score': s, 'label_index': i}."""

    @abstractmethod
    def track(
        self,
        frames: list[np.ndarray],
        prompts: list[dict],
        direction: str,
    ) -> dict[int, np.ndarray]:
        """Propagate prompts forward through the direction-ordered frames.

        ``prompts`` entries carry 'frame', 'box', and optional 'point' in
        direction-local coordinates; 'backward' means the caller's indices
        refer to the reversed video, so implementations reverse ``frames``
        before propagating.
        """


def load_backend(name: str, device: str = "cpu", registry: ModelRegistry | None = None) -> InferenceBackend:
    if name == "stub":
        from .stub import StubBackend

        return StubBackend()
    if name == "real":
        from .real import RealBackend

        return RealBackend(device=device, registry=registry)
    raise ValueError(f"unknown backend {name!r}; expected 'stub' or 'real'")
