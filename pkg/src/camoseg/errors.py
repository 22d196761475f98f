"""Exception hierarchy shared across the package."""


class CamosegError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(CamosegError):
    """Two image-like objects that must share dimensions do not."""


class FormatError(CamosegError):
    """A file or payload does not follow its declared binary/layout format."""


class DatasetError(CamosegError):
    """A dataset directory is missing, empty, or inconsistently laid out."""


class DegenerateGeometryError(CamosegError):
    """Too few or collinear point pairs for a transform fit."""


class ConfigError(CamosegError):
    """Invalid, inconsistent, or unparseable configuration."""


class UnsupportedAggregationError(CamosegError):
    """An aggregation mode was requested for a metric that cannot support it."""


class ProviderError(CamosegError):
    """Base class for model-provider failures."""


class TransportError(ProviderError):
    """Network-level failure talking to a provider; safe to retry."""


class MalformedResponseError(ProviderError):
    """The provider answered, but the payload violates the wire schema."""


class UnknownSessionError(ProviderError):
    """A tracking request referenced a session the provider does not hold."""
