"""Abstract interfaces for the three external neural capabilities.

The pipeline only ever talks to these interfaces; any two providers with the
same I/O behavior are interchangeable. In-process oracles back tests and the
`mock:` scheme, HTTP clients back a real inference sidecar.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

from ..detection import Detection
from ..tracking import Direction, MaskPrompt
from ..video import BinaryMask, FlowField, Frame, VideoSequence


@dataclass(frozen=True)
class ProviderEndpoint:
    """Where a provider lives and how patiently to talk to it."""

    base_url: str
    timeout: float = 30.0
    max_retries: int = 2
    api_version: str = "v1"

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries cannot be negative")


@dataclass(frozen=True)
class ProviderCapabilities:
    supports_concurrent: bool
    max_image_edge: int
    model_name: str
    models: dict[str, str] | None = None

    def __post_init__(self) -> None:
        if self.max_image_edge < 64:
            raise ValueError("max_image_edge must be >= 64")


class FlowProvider(ABC):
    """Dense optical flow between a consecutive frame pair (forward, gap 1)."""

    @abstractmethod
    def compute(self, prev: Frame, curr: Frame) -> FlowField: ...


class DetectorProvider(ABC):
    """Open-vocabulary detection over free-text queries."""

    @abstractmethod
    def detect(
        self, image: Frame, queries: Sequence[str], threshold: float
    ) -> list[Detection]: ...


class SegmenterProvider(ABC):
    """Promptable video segmentation with session reuse.

    ``track`` works in direction-local coordinates: prompt frame indices and
    returned mask indices are positions in the direction-ordered frame list
    (for backward, position j corresponds to original index t - 1 - j). The
    caller (tracking.propagate) owns the mapping to original indices.
    """

    @abstractmethod
    def open_session(self, seq: VideoSequence) -> str: ...

    @abstractmethod
    def track(
        self, session_id: str, prompts: Sequence[MaskPrompt], direction: Direction
    ) -> dict[int, BinaryMask]: ...
