"""camoseg-sidecar: HTTP inference server for the camoseg provider protocol.

Serves dense optical flow, open-vocabulary detection, and promptable video
segmentation behind the five /v1 endpoints. Real pretrained models load
lazily through backend adapters; a deterministic stub backend keeps the full
wire surface testable on any machine.
"""

__version__ = "0.1.0"
