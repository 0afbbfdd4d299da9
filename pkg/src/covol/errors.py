"""Exception hierarchy shared by every covol module."""


class CovolError(Exception):
    """Base class for all library errors."""


class DomainError(CovolError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(CovolError, ValueError):
    """A caller-side precondition (not a numerical one) was violated."""


class DegeneratePathError(CovolError, ValueError):
    """A realized variance is zero, so ratio statistics are undefined."""


class UnsupportedHypothesisError(CovolError, NotImplementedError):
    """The request needs a result that only holds under stronger hypotheses
    (for instance derived-statistic rates with time-varying volatility)."""


class ConsistencyError(CovolError, ArithmeticError):
    """Internal invariant broken; indicates a bug or corrupted input."""


class ConvergenceError(CovolError, ArithmeticError):
    """An iterative solver stopped without meeting its tolerance.

    Attributes
    ----------
    diagnostics : dict
        Solver state at exit (iterate, gradient norm, iteration count...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SingularCovarianceError(CovolError, ArithmeticError):
    """A covariance matrix is too ill-conditioned to solve against."""


class TiltDomainError(DomainError):
    """An exponential tilt leaves the effective domain on some interval."""

    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval
