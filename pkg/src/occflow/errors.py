"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes, so every error that should
reach a user carries an ``exit_code``.
"""


class OccflowError(Exception):
    exit_code = 1


class ConfigurationError(OccflowError):
    """Invalid configuration, bad layer definition or shape mismatch."""

    exit_code = 2


class DependencyError(OccflowError):
    """An upstream pipeline artifact is missing or stale."""

    exit_code = 3


class NumericError(OccflowError):
    """Non-finite values, divergence, or a degenerate training state."""

    exit_code = 4


class StateError(OccflowError):
    """An operation was called out of order (e.g. backward before forward)."""

    exit_code = 4


class IngestionError(ConfigurationError):
    """A dataset file or manifest could not be read."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
