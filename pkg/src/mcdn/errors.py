"""Exception types shared across the package."""


class McdnError(Exception):
    """Base class for all errors raised by this package."""


class GraphError(McdnError, ValueError):
    """Invalid graph structure or malformed graph file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("directed cycle " + " -> ".join(map(str, self.cycle)))


class NotBarrenError(McdnError, ValueError):
    """A district has a member whose parent is also a member."""


class NotDIncreasingError(McdnError, ArithmeticError):
    """Inclusion-exclusion produced a clearly negative mass."""


class UnsupportedConfigurationError(McdnError, ValueError):
    pass


class NotATreeError(McdnError, ValueError):
    pass


class ParameterFileError(McdnError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(McdnError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
