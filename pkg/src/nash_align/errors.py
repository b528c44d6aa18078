"""Exception hierarchy shared by every module."""


class NashAlignError(Exception):
    """Base class for all errors raised by nash_align."""


class ShapeError(NashAlignError, ValueError):
    """Array dimensions disagree with the game they are used with."""


class DomainError(NashAlignError, ValueError):
    """Input lies outside the domain of the operation (e.g. log of zero)."""


class EmptyTableError(NashAlignError, ValueError):
    pass


class ConfigurationError(NashAlignError, ValueError):
    pass


class PoleError(NashAlignError, ValueError):
    """Evaluation point sits on a pole of the alpha function."""

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DivergenceError(NashAlignError, RuntimeError):
    pass


class ParseError(NashAlignError, ValueError):
    """Malformed input file; ``line`` is 1-based and counts the header."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
