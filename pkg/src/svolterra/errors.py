"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SvolterraError(Exception):
    exit_code = 1


class InvalidArgument(SvolterraError, ValueError):
    exit_code = 2


class OutOfRange(InvalidArgument):
    pass


class UnsupportedScheme(SvolterraError):
    exit_code = 2


class MissingGradient(UnsupportedScheme):
    pass


class CovarianceFailure(SvolterraError):
    exit_code = 5


class DivergenceError(SvolterraError):
    exit_code = 3


class NoConvergence(SvolterraError):
    """Adaptive MLMC hit its level cap. ``partial`` holds the last result."""

    exit_code = 4

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OracleFailure(SvolterraError):
    exit_code = 5
