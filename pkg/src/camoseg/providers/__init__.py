from .base import (
    DetectorProvider,
    FlowProvider,
    ProviderCapabilities,
    ProviderEndpoint,
    SegmenterProvider,
)

__all__ = [
    "DetectorProvider",
    "FlowProvider",
    "ProviderCapabilities",
    "ProviderEndpoint",
    "SegmenterProvider",
]
