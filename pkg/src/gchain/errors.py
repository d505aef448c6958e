"""Exception types shared across the package."""


class GChainError(Exception):
    """Base class for all package-specific errors."""


class UnstableError(GChainError):
    """The traffic equations admit no solution with every utilization below one.

    ``indices`` holds the offending queue/warehouse indices; ``bounds`` holds
    the allocation lower bounds that were violated, when they are known.
    """

    def __init__(self, message, indices=(), bounds=None):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)
        self.bounds = bounds


class NonConvergenceError(GChainError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = int(iterations)
        self.residual = float(residual)


class InteriorViolationError(GChainError):
    """The closed-form optimum is not strictly inside the feasible region.

    The closed form assumes an interior optimum; when it produces a
    coordinate at or below zero or below a stability lower bound, the
    numerical optimizer must be used instead.
    """

    def __init__(self, message, P_star=None):
        super().__init__(message)
        self.P_star = P_star


class InfeasibleError(GChainError):
    """No strictly feasible allocation exists for the instance."""


class ModelFileError(GChainError):
    """A model file failed to parse or validate.

    The message starts with the dotted path of the offending field.
    """
