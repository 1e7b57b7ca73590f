"""Exception types raised across the package.

CLI exit codes are attached to the classes so the command layer can map
failures without a lookup table.
"""


class IBCCFError(Exception):
    exit_code = 1


class ParameterError(IBCCFError, ValueError):
    exit_code = 2


class InvalidBoxError(ParameterError):
    pass


class NoOverlapError(ParameterError):
    pass


class UsageError(IBCCFError):
    """Bad command-line input: missing files, unknown config keys."""

    exit_code = 2


class UndefinedAngleError(IBCCFError, ValueError):
    exit_code = 4


class DataError(IBCCFError):
    exit_code = 3


class GenerationError(IBCCFError):
    exit_code = 3


class InitializationError(IBCCFError):
    exit_code = 3


class NumericalFailure(IBCCFError):
    exit_code = 4

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class TrackingFailure(NumericalFailure):
    pass
