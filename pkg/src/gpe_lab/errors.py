"""Exception types raised by the solver laboratory."""


class GPEError(Exception):
    """Base class for all errors raised by ``gpe_lab``."""


class InvalidDomainError(GPEError, ValueError):
    pass


class MeshMismatchError(GPEError, ValueError):
    pass


class NearSingularError(GPEError, ArithmeticError):
    """A pivot of the LDL^T factorization vanished (shift hit an eigenvalue)."""

    def __init__(self, message, index=None, pivot=None):
        super().__init__(message)
        self.index = index
        self.pivot = pivot


class NegativePotentialError(GPEError, ValueError):
    pass


class NotNormalizedError(GPEError, ValueError):
    pass


class ShiftEqualsLambdaError(GPEError, ValueError):
    pass


class NonPositiveGammaError(GPEError, ArithmeticError):
    """(G_u u, u) <= 0; the iterate has left the basin of the damped scheme."""


class NoConvergenceError(GPEError, RuntimeError):
    def __init__(self, message, iterations=None, candidates=None):
        super().__init__(message)
        self.iterations = iterations
        self.candidates = candidates


class MaxIterError(NoConvergenceError):
    pass


class InsufficientDataError(GPEError, ValueError):
    pass


class ConfigError(GPEError, ValueError):
    """Malformed or invalid run configuration.

    ``key`` names the offending setting, ``line`` the 1-based line number for
    syntax errors.
    """

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line
