"""Exception types raised by the toolkit."""


class InsufficientEnsembleError(ValueError):
    """Too few members or samples for the requested statistic."""


class UnsupportedConfigurationError(ValueError):
    """The inputs are valid but outside what an operation supports."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed (singular matrix, non-convergence)."""


class DegenerateWeightsError(NumericalError):
    """Every kernel weight underflowed; the query is an extrapolation."""


class DivergenceError(NumericalError):
    """A state became non-finite during time integration."""

    def __init__(self, message, step=None, member=None):
        super().__init__(message)
        self.step = step
        self.member = member
