"""Exception hierarchy shared by all pricing modules."""


class InfoPricingError(Exception):
    """Base class for every error raised by the package."""


class DomainError(InfoPricingError, ValueError):
    """An argument lies outside the domain of the operation (time ordering, sign, ...)."""


class StateError(InfoPricingError, KeyError):
    """A market state lacks an observation required by the instrument."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConstructionError(InfoPricingError, ValueError):
    """A model object (kernel, weight, factor) failed its construction-time checks."""


class PayoffError(InfoPricingError, ValueError):
    """A payoff or recovery function returned values outside its allowed range."""


class NumericsError(InfoPricingError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class EvaluationError(NumericsError):
    """An integrand returned a non-finite value."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class IntegrationError(NumericsError):
    """Adaptive integration did not reach the requested tolerance.

    Attributes
    ----------
    estimate : float or ndarray
        Best estimate available when the subdivision budget ran out.
    error : float
        Estimated absolute error of ``estimate``.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
