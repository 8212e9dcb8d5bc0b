"""Exception hierarchy shared by all simulator modules."""


class CanepiError(Exception):
    """Base class for simulator errors."""


class ParameterError(CanepiError, ValueError):
    """A function was called with arguments outside its domain."""


class ConfigError(CanepiError):
    """A configuration file or scenario definition is invalid.

    ``key`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        self.message = message
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class GenerationError(CanepiError):
    """The configuration model could not realize a degree sequence."""


class LogicError(CanepiError):
    """An agent operation was applied to an agent in the wrong state."""


class ComputationError(CanepiError, ArithmeticError):
    """A metric is undefined for the given inputs."""


class DegenerateInputError(CanepiError, ValueError):
    """Statistical input carries no variance to test against."""
