"""Exception types shared across the package."""


class RejectedInputError(ValueError):
    """An argument violates an operation's precondition (shape, range, length)."""


class StateError(RuntimeError):
    """An object was used out of order, e.g. backward before forward."""


class ParseError(ValueError):
    """Malformed input file. ``offset`` is the byte offset of the first bad byte."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class SourceUnavailableError(OSError):
    """A required external resource (entropy source, file) is unavailable."""


class NumericalAbort(FloatingPointError):
    """Training produced a non-finite loss. ``dump_path`` points at the state dump."""

    def __init__(self, message, dump_path=None, step=None):
        super().__init__(message)
        self.dump_path = dump_path
        self.step = step
