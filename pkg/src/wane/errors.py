"""Exception hierarchy shared across the package."""


class WaneError(Exception):
    """Base class for all package-specific errors."""


class GraphFormatError(WaneError):
    """Malformed or inconsistent edge-list input."""


class CorpusFormatError(WaneError):
    """Malformed or inconsistent text or label input."""


class DataError(WaneError):
    """Well-formed input that cannot support the requested operation."""


class ConfigError(WaneError):
    """Invalid configuration value or call contract violation."""


class CheckpointError(WaneError):
    """Unreadable, corrupt, truncated, or wrong-version checkpoint file."""


class NumericError(WaneError):
    """Non-finite loss or other numeric breakdown during training."""
