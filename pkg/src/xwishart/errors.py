"""Exception hierarchy shared across the package."""


class XWishartError(Exception):
    """Base class for all package errors."""


class ParameterOutOfRange(XWishartError, ValueError):
    """A model or solver parameter is outside its admissible range."""


class ModelNotPositiveDefinite(XWishartError, ValueError):
    """The assembled correlation matrix is not strictly positive definite.

    Carries ``min_eigenvalue``, the offending (smallest) eigenvalue when it
    is known.
    """

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NonSymmetricInput(XWishartError, ValueError):
    """An operation requiring a symmetric matrix received a nonsymmetric one."""


class DimensionMismatch(XWishartError, ValueError):
    """Matrix dimensions are inconsistent with each other or with the config."""


class EmptyInput(XWishartError, ValueError):
    """An aggregation received no data."""


class ConvergenceFailure(XWishartError, RuntimeError):
    """A numerical routine failed to converge or left its validity domain."""


class MaxIterationsExceeded(ConvergenceFailure):
    """Fixed-point iteration hit the iteration cap.

    ``state`` holds the best iterate reached (with its residual) so callers
    can inspect or accept it.
    """

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class DegenerateDenominator(ConvergenceFailure):
    """A denominator in the self-consistent system vanished."""


class BothRootsDiverged(ConvergenceFailure):
    """Neither root of the inner quadratic lies within the sanity radius."""


class BranchSelectionAmbiguous(ConvergenceFailure):
    """No root of the closed-form polynomial satisfies the half-plane condition."""


class DisjointSupports(XWishartError, ValueError):
    """Two density curves have no overlapping grid range."""


class ConfigInvalid(XWishartError, ValueError):
    """An experiment configuration failed validation.

    ``field_errors`` lists per-field messages.
    """

    def __init__(self, message: str, field_errors: list[str] | None = None):
        super().__init__(message)
        self.field_errors = field_errors or []
