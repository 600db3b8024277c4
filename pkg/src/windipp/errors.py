"""Exception types shared across the pipeline."""


class ConfigError(ValueError):
    """Invalid scenario or pipeline configuration."""


class DomainError(ValueError):
    """A query point lies outside the region a field covers."""


class NumericError(ArithmeticError):
    """Matrix factorization failed even after jitter escalation."""


class PreconditionError(ValueError):
    """An operation's documented precondition does not hold."""


class RoutingError(ValueError):
    """Invalid routing input (bad ids, size limits, unreachable pairs)."""


class MissionError(RuntimeError):
    """The simulated vehicle could not complete its route."""


class PlanningError(RuntimeError):
    """Some required pair of locations has no collision-free path."""
