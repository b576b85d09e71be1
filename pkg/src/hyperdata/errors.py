"""Exception types shared across the package."""


class HyperdataError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(HyperdataError):
    """A constructor or operation precondition was violated."""


class ResolutionError(HyperdataError):
    """A field carries significant spectral content at the truncation degree."""


class DegenerateFitError(HyperdataError):
    """A decay-rate or expansion fit could not be performed (e.g. zero field)."""


class FitQualityError(HyperdataError):
    """An asymptotic-expansion fit left a remainder as large as the model."""


class NonPositiveConformalFactorError(HyperdataError):
    """A conformal factor u must be positive everywhere."""


class HorizonError(HyperdataError):
    """The AdS-Schwarzschild horizon lies inside the requested domain."""


class DivergentTailError(HyperdataError):
    """The right-hand side decays too slowly for the tail integrals to converge."""


class OutOfRangeError(HyperdataError):
    """A requested radius lies outside the grid's radial range."""


class SingularSystemError(HyperdataError):
    """A discrete elliptic system was singular inside the Fredholm window."""


class NonConvergenceError(HyperdataError):
    """An iterative procedure (Newton, shell ladder, bisection) failed to converge."""


class CertificationError(NonConvergenceError):
    """A deformation pipeline could not certify its postcondition."""
