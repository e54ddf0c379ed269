"""Exception types shared across the toolkit."""


class AbusekitError(Exception):
    """Base class for all domain errors (CLI exit code 1)."""


class ManifestError(AbusekitError):
    """Malformed dataset manifest."""


class AudioFormatError(AbusekitError):
    """Unreadable or unsupported WAV payload."""


class StoreError(AbusekitError):
    """Inconsistent embedding store or feature cache."""


class RemoteFetchError(AbusekitError):
    """Embedding service returned an unusable response."""


class ConfigError(AbusekitError):
    """Invalid experiment or CLI configuration."""


class TrainingError(AbusekitError):
    """Training preconditions violated or optimizer failed to converge."""
