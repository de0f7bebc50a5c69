"""Exception hierarchy shared across the pipeline.

Each error class carries the process exit code the CLI maps it to:
0 success, 2 configuration, 3 provider, 4 leakage-guard violation.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_LEAKAGE = 4


class CkmError(Exception):
    """Base class for pipeline errors."""

    exit_code = 1


class ConfigError(CkmError):
    """Invalid run configuration, phase ordering, or window geometry."""

    exit_code = EXIT_CONFIG


class ProviderError(CkmError):
    """Completion/embedding provider failure.

    ``retryable`` distinguishes transient transport faults (retried with
    backoff by the gateway) from persistent failures that abort the window.
    """

    exit_code = EXIT_PROVIDER

    def __init__(self, message, retryable=False):
        super().__init__(message)
        self.retryable = retryable


class IngestError(CkmError):
    """Paper source unreachable or persistently failing. Retryable upstream."""

    exit_code = EXIT_PROVIDER


class LeakageError(CkmError):
    """A future-dated paper reached a generation context, knowledge update,
    or evaluation input. Always a hard error, never a warning."""

    exit_code = EXIT_LEAKAGE
