"""Open-vocabulary detection on highlighted frames.

The query set pairs one positive prompt with a few negative prompts; objects
that resemble a negative phrase get classified into it and stop competing
with the target. Selection keeps the single best positive-labeled box, since
camouflage segmentation is treated as a single-object problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .cues import HighlightedFrame
from .video import BoundingBox

if TYPE_CHECKING:
    from .providers.base import DetectorProvider

DEFAULT_POSITIVE = "an animal or insect being highlighted in blue"
DEFAULT_NEGATIVES = ("background", "logo or sign", "plant")

PROMPT_VARIANTS = ("default", "no_prior", "no_highlight", "no_negatives")


@dataclass(frozen=True)
class PromptSet:
    """One positive query plus optional negative distractor queries."""

    positive: str
    negatives: tuple[str, ...] = DEFAULT_NEGATIVES

    def __post_init__(self) -> None:
        if not self.positive.strip():
            raise ValueError("positive prompt must be non-empty")
        object.__setattr__(self, "negatives", tuple(self.negatives))

    def queries(self) -> list[str]:
        """Query list for the provider; the positive is always index 0."""
        return [self.positive, *self.negatives]

    POSITIVE_INDEX = 0


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    label_index: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.label_index < 0:
            raise ValueError("label_index must be non-negative")


def build_prompt_set(
    variant: str = "default",
    positive: str | None = None,
    negatives: Sequence[str] | None = None,
) -> PromptSet:
    """Build the configured prompt set.

    Variants mirror the prompting ablations: ``no_prior`` swaps the animal
    mention for "object", ``no_highlight`` drops the highlight mention,
    ``no_negatives`` empties the negative list. Explicit ``positive`` /
    ``negatives`` override the variant texts.
    """
    if variant not in PROMPT_VARIANTS:
        raise ValueError(f"unknown prompt variant {variant!r}; pick one of {PROMPT_VARIANTS}")
    pos = DEFAULT_POSITIVE
    neg: tuple[str, ...] = DEFAULT_NEGATIVES
    if variant == "no_prior":
        pos = "an object being highlighted in blue"
    elif variant == "no_highlight":
        pos = "an animal or insect"
    elif variant == "no_negatives":
        neg = ()
    if positive is not None:
        pos = positive
    if negatives is not None:
        neg = tuple(negatives)
    return PromptSet(positive=pos, negatives=neg)


def detect_frame(
    provider: "DetectorProvider",
    frame: HighlightedFrame,
    prompts: PromptSet,
    threshold: float,
) -> list[Detection]:
    """Query the provider and keep detections at or above the threshold.

    Boxes are clipped to the frame; provider transport failures propagate as
    retriable errors.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    queries = prompts.queries()
    raw = provider.detect(frame.frame, queries, threshold)
    out: list[Detection] = []
    for det in raw:
        if det.score < threshold or det.label_index >= len(queries):
            continue
        try:
            box = det.box.clipped(frame.width, frame.height)
        except ValueError:
            continue
        out.append(Detection(box=box, score=det.score, label_index=det.label_index))
    return out


def select_top_box(detections: Sequence[Detection]) -> Detection | None:
    """Best positive-labeled box by score; negatives never win.

    Ties break toward the larger box area, then the smaller x0, so selection
    is deterministic for a fixed detection list.
    """
    positives = [d for d in detections if d.label_index == PromptSet.POSITIVE_INDEX]
    if not positives:
        return None
    return max(positives, key=lambda d: (d.score, d.box.area, -d.box.x0))
