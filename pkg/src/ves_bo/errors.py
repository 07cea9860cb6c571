"""Exception hierarchy shared by every module of the package."""


class VesError(Exception):
    """Base class for all errors raised by ``ves_bo``."""


class DomainError(VesError, ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(VesError, ValueError):
    """Array dimensions are inconsistent."""


class BracketError(VesError, ValueError):
    """A root-finding bracket does not contain a sign change."""


class ConvergenceError(VesError, RuntimeError):
    """An iterative routine hit its iteration cap."""


class LinAlgError(VesError, ArithmeticError):
    """A kernel matrix stayed indefinite after jitter escalation."""


class StateError(VesError, RuntimeError):
    """An object is used before it has been prepared."""


class OptimizationError(VesError, RuntimeError):
    """The acquisition optimizer could not produce a finite candidate."""


class ConfigError(VesError, ValueError):
    """An experiment configuration is invalid."""
