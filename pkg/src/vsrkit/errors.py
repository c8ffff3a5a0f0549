"""Error taxonomy shared by the core package, the service, and the CLI.

``exit_code`` is what the CLI process returns for the failure; ``kind`` is
the machine-readable tag carried in service error payloads.
"""


class VsrkitError(Exception):
    exit_code = 1
    kind = "error"


class ConfigError(VsrkitError):
    """Invalid configuration value, option, or operator precondition."""

    exit_code = 2
    kind = "config"


class DimensionError(ConfigError):
    """Shape mismatch or non-divisible dimensions."""


class DataIOError(VsrkitError):
    """Unreadable, missing, or malformed on-disk inputs/outputs."""

    exit_code = 3
    kind = "io"


class NumericalError(VsrkitError):
    """Numerical failure, e.g. solver non-convergence under strict mode."""

    exit_code = 4
    kind = "numerical"
