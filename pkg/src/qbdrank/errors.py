"""Shared exception hierarchy.

ConfigError and DataError map to distinct CLI exit codes (2 and 3);
everything else surfaces as an internal error (4).
"""


class QbdError(Exception):
    """Base class for all package errors."""


class ConfigError(QbdError):
    """Invalid configuration or command-line usage."""


class DataError(QbdError):
    """Malformed or inconsistent input data."""
