"""Exception hierarchy shared by all modules."""


class AmpGdfError(Exception):
    """Base class for every error raised by this package."""


class CurvatureError(AmpGdfError, ValueError):
    """Effective variance too large for the closed-form branch structure of the prox."""


class ZeroArgument(AmpGdfError, ValueError):
    """Subgradient requested at the origin, where it is set-valued."""


class DimensionMismatch(AmpGdfError, ValueError):
    pass


class NegativeVariance(AmpGdfError, ValueError):
    pass


class NumericalDivergence(AmpGdfError, ArithmeticError):
    """AMP iterates blew past the overflow guard (or left the valid prox domain)."""


class EmptySupport(AmpGdfError):
    pass


class SingularSystem(AmpGdfError, ArithmeticError):
    """Penalized Gram matrix on the support is numerically singular."""


class ReclassificationLoop(AmpGdfError, ArithmeticError):
    """Branch assignment on the support did not stabilize."""


class NegativeCorrectedVariance(AmpGdfError, ArithmeticError):
    pass


class NoConvergence(AmpGdfError, ArithmeticError):
    """Iteration budget exhausted. ``last`` carries the final iterate when available."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class UnstableRegion(NoConvergence):
    """Replica iteration hit a vanishing transient-region denominator or oscillated."""


class SolverFailure(AmpGdfError, ArithmeticError):
    pass


class ParseError(AmpGdfError, ValueError):
    pass


class RankWarning(UserWarning):
    """Pseudo-inverse used on a rank-deficient or wide design."""
