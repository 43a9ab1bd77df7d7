"""Exception hierarchy shared by every stage of the pipeline."""


class SparqError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecord(SparqError):
    def __init__(self, line, reason=""):
        self.line = line
        super().__init__(f"malformed record at line {line}" + (f": {reason}" if reason else ""))


class DuplicateTimestamp(SparqError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"duplicate timestamp {t}")


class EmptyInput(SparqError):
    pass


class InsufficientOverlap(SparqError):
    pass


class EmptyInterval(SparqError):
    pass


class NyquistViolation(SparqError):
    pass


class LengthMismatch(SparqError):
    pass


class GridMisaligned(SparqError):
    pass


class SizeMismatch(SparqError):
    pass


class EmptyList(SparqError):
    pass


class InvalidLMin(SparqError):
    pass


class InvalidPolicy(SparqError):
    pass


class ConfigError(SparqError):
    pass


class Unauthorized(SparqError):
    pass


class NotFound(SparqError):
    pass


class StoreError(SparqError):
    pass


class UnrealizableSpec(SparqError):
    pass


class FormatError(SparqError):
    """Raised when a serialized container cannot be decoded."""
