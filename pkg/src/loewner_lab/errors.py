"""Exception taxonomy shared across the package.

Exit-code mapping in the CLI: verdict failures are ordinary results
(exit 1), every exception below is an error (exit 2).
"""


class LoewnerLabError(Exception):
    """Base class for all package errors."""


class InputError(LoewnerLabError):
    """Malformed input data (non-finite entries, wrong shapes, bad config)."""


class DomainError(LoewnerLabError):
    """Argument outside the mathematical domain (point not in the open ball, bad radius)."""


class ParameterError(LoewnerLabError):
    """Parameter outside its admissible range (r not in (0,1), A >= a, eps > eps0)."""


class PreconditionError(LoewnerLabError):
    """A required certificate or sampled precondition is missing or failed."""


class SingularMatrixError(LoewnerLabError):
    """Matrix too close to singular to invert."""

    def __init__(self, message: str, sigma_min: float = 0.0):
        super().__init__(message)
        self.sigma_min = sigma_min


class IntegrationError(LoewnerLabError):
    """Adaptive stepping failed (step-size underflow); carries the location."""

    def __init__(self, message: str, t: float = float("nan")):
        super().__init__(message)
        self.t = t


class ConsistencyError(LoewnerLabError):
    """A trajectory violated an invariant it must satisfy (left the ball)."""


class HorizonError(LoewnerLabError):
    """Chain recovery did not converge within the horizon schedule."""

    def __init__(self, message: str, achieved_diff: float = float("nan")):
        super().__init__(message)
        self.achieved_diff = achieved_diff


class NotFoundError(LoewnerLabError):
    """Search exhausted without a result (e.g. no coefficient with L != 0)."""


class UnsupportedChainError(LoewnerLabError):
    """Operation needs a driving vector field the chain does not carry."""
