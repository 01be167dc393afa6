"""Exception hierarchy and process exit codes shared across the pipeline."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class RefqualError(Exception):
    """Base class for all pipeline errors."""

    exit_code = EXIT_DATA


class DataError(RefqualError):
    """Malformed, inconsistent, or missing input data."""

    exit_code = EXIT_DATA


class DegenerateDataError(DataError):
    """A statistic is undefined on the given data (constant vector, zero weights)."""


class BackendError(RefqualError):
    """A scoring-backend request failed permanently."""

    exit_code = EXIT_BACKEND


class TransientBackendError(BackendError):
    """Retryable backend failure: timeout, throttling, 5xx."""


class FatalBackendError(BackendError):
    """Non-retryable backend failure: bad credentials or misconfiguration."""
