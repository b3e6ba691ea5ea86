"""Exception hierarchy shared by the solver, the measures and the CLI."""


class FDRError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(FDRError, ValueError):
    """Malformed input: unknown builtin names, bad shapes, schema violations."""


class DomainError(FDRError, ValueError):
    """A function was evaluated outside its domain."""


class InfeasiblePointError(FDRError):
    """The argument of the inverse derivative left its range at a support point."""

    def __init__(self, message, point=None, index=None):
        super().__init__(message)
        self.point = point
        self.index = index


class NoFeasibleBeta(FDRError):
    """No normalization constant exists for the requested regularization factor.

    ``reason`` is ``"empty"`` when the feasible multiplier set is empty and
    ``"below_threshold"`` when the set is nonempty but the constraint
    integral never reaches one on it.
    """

    def __init__(self, message, reason="below_threshold", lambda_star=None):
        super().__init__(message)
        self.reason = reason
        self.lambda_star = lambda_star


class DivergentIntegral(FDRError):
    """Every probe of the constraint integral returned +inf."""


class NonConvergence(FDRError):
    """An iterative routine exhausted its budget without meeting tolerance."""


class Inconclusive(FDRError):
    """A boundary probe sequence neither converged nor diverged."""

    def __init__(self, message, sequence=None):
        super().__init__(message)
        self.sequence = list(sequence or [])


class PreconditionError(FDRError):
    """An operation was called on an instance that does not meet its precondition."""
