"""Real pretrained-model backend.

Adapters over three model families, loaded lazily on first use so the
server process starts (and the stub tests run) without GPU dependencies
installed:

* dense flow: RAFT (torchvision), FlyingThings-trained weights;
* detection: OWLv2 base/patch16 ensemble (transformers);
* video segmentation: SAM 2.1 hiera-small video predictor (sam2 package).

Images go to the detector unresized; each model performs whatever internal
preprocessing its processor requires. Missing dependencies or weights raise
BackendUnavailable, which the server maps to 503 "model not loaded".
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import BackendUnavailable, InferenceBackend, ModelRegistry

DEFAULT_REGISTRY = ModelRegistry(
    flow="RAFT-Things",
    detector="Owlv2-Base-Patch16-Ensemble",
    segmenter="Sam2.1-Hiera-Small",
)

DETECTOR_CHECKPOINT = "google/owlv2-base-patch16-ensemble"
SEGMENTER_CHECKPOINT = "facebook/sam2.1-hiera-small"


class RealBackend(InferenceBackend):
    def __init__(self, device: str = "cpu", registry: ModelRegistry | None = None) -> None:
        self.device = device
        self.registry = registry or DEFAULT_REGISTRY
        self._flow_model = None
        self._flow_transforms = None
        self._detector = None
        self._detector_processor = None
        self._segmenter = None

    # -- flow ---------------------------------------------------------------

    def _ensure_flow(self):
        if self._flow_model is not None:
            return
        try:
            import torch
            from torchvision.models.optical_flow import Raft_Large_Weights, raft_large
        except ImportError as exc:
            raise BackendUnavailable(
                "flow backend needs torch and torchvision; pip install 'camoseg-sidecar[real]'"
            ) from exc
        weights = Raft_Large_Weights.C_T_V2  # chairs + things training schedule
        self._flow_model = raft_large(weights=weights).eval().to(self.device)
        self._flow_transforms = weights.transforms()
        self._torch = torch

    def flow(self, prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
        self._ensure_flow()
        torch = self._torch
        with torch.no_grad():
            a = torch.from_numpy(prev).permute(2, 0, 1).unsqueeze(0).float()
            b = torch.from_numpy(curr).permute(2, 0, 1).unsqueeze(0).float()
            a, b = self._flow_transforms(a, b)
            flows = self._flow_model(a.to(self.device), b.to(self.device))
        out = flows[-1][0].cpu().numpy()  # (2, h, w), dx then dy
        return np.moveaxis(out, 0, 2).astype(np.float32)

    # -- detection ------------------------------------------------------------

    def _ensure_detector(self):
        if self._detector is not None:
            return
        try:
            import torch
            from transformers import Owlv2ForObjectDetection, Owlv2Processor
        except ImportError as exc:
            raise BackendUnavailable(
                "detector backend needs torch and transformers; "
                "pip install 'camoseg-sidecar[real]'"
            ) from exc
        self._detector_processor = Owlv2Processor.from_pretrained(DETECTOR_CHECKPOINT)
        self._detector = (
            Owlv2ForObjectDetection.from_pretrained(DETECTOR_CHECKPOINT)
            .eval()
            .to(self.device)
        )
        self._torch = torch

    def detect(
        self, image: np.ndarray, queries: list[str], threshold: float
    ) -> list[dict]:
        self._ensure_detector()
        torch = self._torch
        from PIL import Image

        pil = Image.fromarray(image, mode="RGB")
        inputs = self._detector_processor(
            text=[queries], images=pil, return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            outputs = self._detector(**inputs)
        target_size = torch.tensor([[image.shape[0], image.shape[1]]])
        results = self._detector_processor.post_process_object_detection(
            outputs, threshold=threshold, target_sizes=target_size
        )[0]
        detections = []
        h, w = image.shape[:2]
        for box, score, label in zip(
            results["boxes"], results["scores"], results["labels"]
        ):
            x0, y0, x1, y1 = (float(v) for v in box.tolist())
            x0, x1 = max(0.0, x0), min(float(w), x1)
            y0, y1 = max(0.0, y0), min(float(h), y1)
            if x1 <= x0 or y1 <= y0:
                continue
            detections.append(
                {
                    "box": [x0, y0, x1, y1],
                    "score": min(1.0, max(0.0, float(score))),
                    "label_index": int(label),
                }
            )
        return detections

    # -- tracking -------------------------------------------------------------

    def _ensure_segmenter(self):
        if self._segmenter is not None:
            return
        try:
            import torch
            from sam2.sam2_video_predictor import SAM2VideoPredictor
        except ImportError as exc:
            raise BackendUnavailable(
                "segmenter backend needs torch and the sam2 package; "
                "pip install 'camoseg-sidecar[real]' sam2"
            ) from exc
        self._segmenter = SAM2VideoPredictor.from_pretrained(
            SEGMENTER_CHECKPOINT, device=self.device
        )
        self._torch = torch

    def track(
        self,
        frames: list[np.ndarray],
        prompts: list[dict],
        direction: str,
    ) -> dict[int, np.ndarray]:
        self._ensure_segmenter()
        torch = self._torch
        if direction == "backward":
            frames = list(reversed(frames))
        if not prompts:
            return {}
        from PIL import Image

        h, w = frames[0].shape[:2]
        out: dict[int, np.ndarray] = {}
        # the predictor ingests a JPEG frame directory; all prompts share one
        # inference state per direction
        with tempfile.TemporaryDirectory(prefix="sidecar_track_") as tmp:
            for i, frame in enumerate(frames):
                Image.fromarray(frame, mode="RGB").save(
                    Path(tmp) / f"{i:05d}.jpg", quality=95
                )
            with torch.inference_mode():
                state = self._segmenter.init_state(video_path=tmp)
                for prompt in prompts:
                    box = np.asarray(prompt["box"], dtype=np.float32)
                    point = prompt.get("point")
                    points = (
                        np.asarray([point], dtype=np.float32) if point is not None else None
                    )
                    labels = np.asarray([1], dtype=np.int32) if point is not None else None
                    self._segmenter.add_new_points_or_box(
                        inference_state=state,
                        frame_idx=int(prompt["frame"]),
                        obj_id=1,
                        box=box,
                        points=points,
                        labels=labels,
                    )
                for frame_idx, _, mask_logits in self._segmenter.propagate_in_video(state):
                    mask = (mask_logits[0] > 0.0).cpu().numpy().reshape(h, w)
                    out[int(frame_idx)] = mask
        return out
