"""Exception types shared across the package."""


class NetsparseError(Exception):
    """Base class for all package errors."""


class NonFiniteInput(NetsparseError, ValueError):
    pass


class DimensionMismatch(NetsparseError, ValueError):
    pass


class InsufficientHistory(NetsparseError, ValueError):
    pass


class GraphError(NetsparseError, ValueError):
    """Communication graph violates the single-path tree assumption."""


class CyclicGraph(GraphError):
    pass


class MultiplePaths(GraphError):
    def __init__(self, vertex: int, count: int):
        super().__init__(f"vertex {vertex} has {count} paths to the estimator")
        self.vertex = vertex
        self.count = count


class Unreachable(GraphError):
    def __init__(self, vertex: int):
        super().__init__(f"vertex {vertex} has no path to the estimator")
        self.vertex = vertex


class SeedMismatch(NetsparseError):
    """Transmitter and receiver configurations do not agree."""


class ConfigError(NetsparseError, ValueError):
    pass


class MissingTrace(NetsparseError, FileNotFoundError):
    pass


class InvariantViolation(NetsparseError, RuntimeError):
    pass
