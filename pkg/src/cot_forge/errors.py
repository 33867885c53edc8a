"""Exception hierarchy shared across cot_forge."""


class CotForgeError(Exception):
    """Base class for every error raised by this package."""


class EmptyInput(CotForgeError, ValueError):
    """Text was empty or whitespace-only."""


class LabelError(CotForgeError, ValueError):
    """No usable label could be read from a response."""


class NoLabelFound(LabelError):
    pass


class LabelOutOfRange(LabelError):
    def __init__(self, label: int, size: int):
        super().__init__(f"label {label} outside label space of size {size}")
        self.label = label
        self.size = size


class InvalidBand(CotForgeError, ValueError):
    pass


class RecordError(CotForgeError, ValueError):
    """A serialized record is missing fields or has invalid values."""


class ParseError(CotForgeError):
    def __init__(self, path: str, lineno: int, reason: str):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.path = path
        self.lineno = lineno
        self.reason = reason


class ConfigError(CotForgeError, ValueError):
    pass


class EndpointError(CotForgeError):
    def __init__(self, message: str, status: int | None = None, attempts: int = 0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class MalformedResponse(EndpointError):
    pass


class ProtocolViolation(CotForgeError):
    pass


class EmptyEval(CotForgeError, ValueError):
    pass
