"""Exception hierarchy shared by the simulator, search and CLI."""


class QasError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QasError, ValueError):
    pass


class CircuitError(QasError, ValueError):
    """A gate or circuit violates its structural invariants."""


class ObservableError(QasError, ValueError):
    """Mismatched sizes or a non-Hermitian observable."""


class ResourceError(QasError):
    """The requested dense object would be too large."""


class ParseError(QasError, ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SamplingError(QasError):
    """No valid action could be drawn for the circuit/distribution pair."""


class ActionError(QasError, ValueError):
    """An edit action does not apply to the given circuit."""


class ProblemError(QasError, ValueError):
    pass


class DegenerateInstanceError(ProblemError):
    pass


class OptimizerError(QasError, ValueError):
    pass
