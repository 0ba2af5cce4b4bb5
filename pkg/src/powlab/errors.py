"""Error types and the process exit codes they map to.

Exit-code contract (shared by the CLI and the HTTP service):
0 success, 2 configuration error, 3 data validation error, 4 numerical failure.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class PowlabError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class ConfigurationError(PowlabError):
    """Invalid parameters, configuration, or file references."""

    exit_code = EXIT_CONFIG


class DataValidationError(PowlabError):
    """Chain data violates a structural invariant (ordering, signs, schema)."""

    exit_code = EXIT_DATA


class NumericalError(PowlabError):
    """A numerical routine failed to converge or reported garbage."""

    exit_code = EXIT_NUMERIC
