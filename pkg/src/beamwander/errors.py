"""Exception hierarchy shared by all modules."""


class BeamWanderError(Exception):
    """Base class for errors raised by this package."""


class DomainError(BeamWanderError, ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateGeometryError(DomainError):
    """Aperture/beam geometry too extreme for the analytic transmission fit."""


class ConvergenceError(BeamWanderError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate and its error bound are attached so callers
    can decide whether to use them anyway.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class InfeasiblePostSelectionError(BeamWanderError):
    """The post-selected event set has (numerically) zero probability."""


class UndefinedCorrelationError(BeamWanderError, ArithmeticError):
    """Coincidence probabilities vanish so the correlation is undefined."""


class TruncationError(BeamWanderError):
    """Fock-space truncation keeps too little of the state norm."""
