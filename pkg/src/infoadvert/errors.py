"""Exception hierarchy shared by the solvers and the command-line front end."""


class InfoAdvertError(Exception):
    """Base class for all package errors."""


class ValidationError(InfoAdvertError, ValueError):
    """Input data violates a model invariant (shapes, simplex, ranges)."""


class UndefinedPosteriorError(ValidationError):
    """A signal has zero probability under the buyer's prior."""


class SolverError(InfoAdvertError, RuntimeError):
    """A numerical backend failed or returned an unusable answer."""


class ResourceCapError(InfoAdvertError):
    """An enumeration would exceed a configured size cap."""
