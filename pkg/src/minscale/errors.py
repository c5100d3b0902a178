"""Exception types shared across the package."""


class MinScaleError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(MinScaleError, ValueError):
    """Malformed or out-of-contract input (bad shapes, non-finite data, ...)."""


class InvalidStateError(MinScaleError, RuntimeError):
    """Operation applied to an object in the wrong state."""


class DegenerateBodyError(MinScaleError):
    """Body geometry too thin for the query (seed on the hull boundary, flat hull)."""


class SubgradientOnlyError(MinScaleError):
    """Scale result is degenerate; only a subgradient is available.

    Callers that can live with a subgradient should retry the gradient
    assembly with the solver basis subset (allow_subgradient=True).
    """


class DegenerateActiveSetError(MinScaleError):
    """Active constraint system is singular or inconsistent with the LP solution."""


class NumericalError(MinScaleError):
    """Internal numeric failure (solver returned something impossible)."""
