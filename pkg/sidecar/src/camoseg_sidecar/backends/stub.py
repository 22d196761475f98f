"""Deterministic CPU stub backend.

No neural weights: flow comes from FFT phase correlation (a single global
translation broadcast densely), detection finds the blue-tinted region the
pipeline's highlighting produces, and tracking paints each prompt box as a
static rectangle from its frame onward. Good enough to exercise every wire
path and the pipeline end to end on machines without GPUs.
"""

from __future__ import annotations

import numpy as np

from . import InferenceBackend, ModelRegistry

# natural textures rarely push blue more than ~135 levels above the other
# channels; a saturated highlight reaches 255, so this floor keys on the
# caller's highlighting rather than scene colors
BLUENESS_FLOOR = 160.0


class StubBackend(InferenceBackend):
    registry = ModelRegistry(
        flow="stub-phase-correlation",
        detector="stub-blueness-detector",
        segmenter="stub-static-box-tracker",
    )

    def flow(self, prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
        h, w = prev.shape[:2]
        if np.array_equal(prev, curr):
            return np.zeros((h, w, 2), dtype=np.float32)
        a = prev.astype(np.float64).mean(axis=2)
        b = curr.astype(np.float64).mean(axis=2)
        fa = np.fft.rfft2(a)
        fb = np.fft.rfft2(b)
        cross = fb * np.conj(fa)
        denom = np.abs(cross)
        denom[denom == 0] = 1.0
        corr = np.fft.irfft2(cross / denom, s=a.shape)
        peak = np.unravel_index(int(np.argmax(corr)), corr.shape)
        dy, dx = peak
        if dy > h / 2:
            dy -= h
        if dx > w / 2:
            dx -= w
        out = np.empty((h, w, 2), dtype=np.float32)
        out[:, :, 0] = dx
        out[:, :, 1] = dy
        return out

    def detect(
        self, image: np.ndarray, queries: list[str], threshold: float
    ) -> list[dict]:
        px = image.astype(np.float64)
        blueness = px[:, :, 2] - np.maximum(px[:, :, 0], px[:, :, 1])
        hot = blueness > BLUENESS_FLOOR
        if not hot.any():
            return []
        ys, xs = np.nonzero(hot)
        score = float(min(0.99, blueness[hot].mean() / 255.0 * 2.0))
        if score < threshold:
            return []
        return [
            {
                "box": [float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1)],
                "score": score,
                "label_index": 0,
            }
        ]

    def track(
        self,
        frames: list[np.ndarray],
        prompts: list[dict],
        direction: str,
    ) -> dict[int, np.ndarray]:
        if direction == "backward":
            frames = list(reversed(frames))
        if not prompts:
            return {}
        h, w = frames[0].shape[:2]
        by_frame = sorted(prompts, key=lambda p: p["frame"])
        first = by_frame[0]["frame"]
        out: dict[int, np.ndarray] = {}
        for j in range(first, len(frames)):
            # latest prompt at or before j defines the box
            active = [p for p in by_frame if p["frame"] <= j][-1]
            x0, y0, x1, y1 = active["box"]
            mask = np.zeros((h, w), dtype=bool)
            mask[
                max(0, int(round(y0))) : min(h, int(round(y1))),
                max(0, int(round(x0))) : min(w, int(round(x1))),
            ] = True
            out[j] = mask
        return out
