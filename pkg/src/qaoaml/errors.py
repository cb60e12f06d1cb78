"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class ResourceError(RuntimeError):
    """A request exceeds a configured resource limit (e.g. qubit count)."""


class ObjectiveError(ArithmeticError):
    """The objective returned a non-finite value; the optimizer aborted."""


class TrainingError(RuntimeError):
    """A regression model could not be fitted."""
