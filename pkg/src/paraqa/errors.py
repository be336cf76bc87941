"""Exception hierarchy shared by every stage of the pipeline."""


class ParaQAError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 5


class ConfigError(ParaQAError, ValueError):
    exit_code = 2


class InputError(ParaQAError, ValueError):
    exit_code = 3


class EmptyInputError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(InputError):
    pass


class TrainingError(ParaQAError):
    exit_code = 3


class TransportError(ParaQAError, ConnectionError):
    exit_code = 4


class ProtocolError(ParaQAError):
    exit_code = 4


class InvariantViolation(ParaQAError, AssertionError):
    exit_code = 5
