"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A component was wired with inconsistent shapes or settings."""


class ContractViolation(RuntimeError):
    """A caller violated a documented precondition."""


class InvalidActionError(ValueError):
    """The mechanism action is not legal in the current state.

    Raised instead of silently repairing: callers are expected to mask
    invalid actions at the policy level.
    """


class InstanceTooLargeError(ValueError):
    """A brute-force oracle was asked to enumerate beyond its budget."""


class ConfigError(ValueError):
    """An experiment config file failed to parse or validate.

    ``line`` is the 1-based line of the offending entry when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
